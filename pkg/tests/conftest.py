import numpy as np
import pytest

from amoebakit.amoeba_geom import GridSpec, PointCloud, rasterize
from amoebakit.poly_core import ExponentialSum, LaurentPolynomial


@pytest.fixture
def line():
    """1 + z1 + z2: the three-tentacle amoeba."""
    return LaurentPolynomial.from_terms(2, [([0, 0], 1), ([1, 0], 1), ([0, 1], 1)])


@pytest.fixture
def shifted():
    """z - 2."""
    return LaurentPolynomial.from_terms(1, [([1], 1), ([0], -2)])


@pytest.fixture
def monomial():
    """3 z1^2 z2^-1."""
    return LaurentPolynomial.from_terms(2, [([2, -1], 3)])


@pytest.fixture
def one_plus_exp():
    """1 + e^{iz}, zeros at odd multiples of pi."""
    return ExponentialSum.from_terms(1, [([0.0], 1), ([1.0], 1)])


@pytest.fixture
def point_region():
    spec = GridSpec(((-1.0, 1.0), (-1.0, 1.0)), 0.05)
    return rasterize(PointCloud(2, np.array([[0.025, 0.025]])), spec)
