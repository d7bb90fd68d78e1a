import math

import numpy as np
import pytest

from amoebakit.amoeba_geom import GridRegion, GridSpec, PointCloud, rasterize
from amoebakit.errors import PreconditionError, SpecMismatchError
from amoebakit.num_kernels import QuadratureSpec
from amoebakit.poly_core import newton_polytope
from amoebakit.ronkin import (
    RonkinField,
    component_orders,
    convexity_margin,
    gradient_field,
    laplacian_mass,
    ronkin_field,
    ronkin_value,
    support_compare,
)

LINE_MAHLER = 0.3230659472194505


@pytest.mark.parametrize("y", [-1.0, 0.0, math.log(2), 1.5])
def test_jensen_formula(shifted, y):
    assert ronkin_value(shifted, [y]) == pytest.approx(max(y, math.log(2)), abs=1e-12)


def test_mahler_measure_of_the_line(line):
    assert ronkin_value(line, [0.0, 0.0], QuadratureSpec(4096, 1)) == pytest.approx(LINE_MAHLER, abs=1e-6)


def test_fiberwise_and_plain_rules_agree_off_the_amoeba(line):
    y = [2.0, -2.0]
    exact = ronkin_value(line, y, QuadratureSpec(64, 1))
    plain = ronkin_value(line, y, QuadratureSpec(64, 2), fiberwise=False)
    assert exact == pytest.approx(2.0, abs=1e-12)
    assert plain == pytest.approx(2.0, abs=1e-10)


def test_monomial_field_is_affine(monomial):
    spec = GridSpec(((-1, 1), (-1, 1)), 0.25)
    field = ronkin_field(monomial, spec)
    y = spec.centers()
    exact = (math.log(3) + 2 * y[:, 0] - y[:, 1]).reshape(spec.shape)
    assert np.abs(field.values - exact).max() <= 1e-12
    assert abs(laplacian_mass(field).total) <= 1e-10
    assert field.flagged == 0


def test_field_dimension_mismatch(monomial):
    with pytest.raises(SpecMismatchError):
        ronkin_field(monomial, GridSpec(((-1, 1),), 0.1))


def test_unit_mass_of_a_simple_zero(shifted):
    spec = GridSpec(((-2, 2),), 0.01)
    field = ronkin_field(shifted, spec)
    mass = laplacian_mass(field)
    assert mass.total == pytest.approx(1.0, abs=1e-3)
    y = spec.axis_centers(0)
    assert np.abs(mass.mass[np.abs(y - math.log(2)) > 0.03]).sum() < 1e-9
    assert convexity_margin(field) >= -1e-9


def test_gradient_field_shape_and_values(monomial):
    spec = GridSpec(((-1, 1), (-1, 1)), 0.25)
    grads = gradient_field(ronkin_field(monomial, spec))
    assert grads.shape == (8, 8, 2)
    assert grads[..., 0] == pytest.approx(np.full((8, 8), 2.0))
    assert grads[..., 1] == pytest.approx(np.full((8, 8), -1.0))


def test_gradient_needs_three_cells():
    spec = GridSpec(((-1, 1),), 1.0)
    field = RonkinField(spec, np.zeros(2), np.zeros(2), np.zeros(2), np.zeros(2, dtype=bool))
    with pytest.raises(PreconditionError):
        gradient_field(field)


def test_support_of_the_mass_is_the_amoeba(shifted):
    spec = GridSpec(((-2, 2),), 0.01)
    mass = laplacian_mass(ronkin_field(shifted, spec))
    amoeba = rasterize(PointCloud(1, np.array([[math.log(2)]])), spec)
    report = support_compare(mass, amoeba)
    assert report.outside_mass_fraction < 1e-9
    assert report.uncovered_amoeba_cells == 0
    assert report.hausdorff_cells is not None and report.hausdorff_cells <= 2


def test_component_order_of_an_affine_field():
    spec = GridSpec(((-1, 1), (-1, 1)), 0.1)
    y = spec.centers()
    values = (0.5 * y[:, 0] - 2 * y[:, 1] + 1).reshape(spec.shape)
    zeros = np.zeros(spec.shape)
    field = RonkinField(spec, values, zeros, zeros, zeros.astype(bool))
    occupancy = np.zeros(spec.shape, dtype=bool)
    occupancy[:6] = True
    (order,) = component_orders(field, GridRegion(spec, occupancy))
    assert order.order == pytest.approx((0.5, -2.0))
    assert order.mean_gradient == pytest.approx((0.5, -2.0))
    assert order.residual < 1e-12
    assert order.truncated


@pytest.mark.parametrize("c", [3.0, 0.25j, -2 + 1j])
def test_constant_factor_shifts_by_its_log(line, c):
    for y in ([0.0, 0.0], [1.5, -0.5], [-2.0, 1.0]):
        assert ronkin_value(c * line, y) - ronkin_value(line, y) == pytest.approx(math.log(abs(c)), abs=1e-10)


def test_rescaling_translates_the_ronkin_function(line):
    a = np.array([2.0, 0.5j])
    log_a = np.log(np.abs(a))
    rescaled = line.rescaled(a)
    for y in ([2.0, -1.5], [-2.0, -2.0], [-1.5, 2.0]):
        shifted_y = np.array(y) - log_a
        assert ronkin_value(rescaled, shifted_y) == pytest.approx(ronkin_value(line, y), abs=1e-8)


def test_gradients_lie_in_the_newton_polytope(line):
    spec = GridSpec(((-2, 2), (-2, 2)), 0.2)
    field = ronkin_field(line, spec, QuadratureSpec(256, 1), adaptive=False)
    polytope = newton_polytope(line)
    grads = gradient_field(field).reshape(-1, 2)
    assert all(polytope.contains(g, tol=1e-2) for g in grads)
