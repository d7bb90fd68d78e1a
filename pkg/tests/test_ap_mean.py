import math

import numpy as np
import pytest

from amoebakit.amoeba_geom import GridSpec
from amoebakit.ap_mean import (
    LadderSpec,
    bohr_mean,
    mean_log_modulus,
    pullback_consistency,
    slope_jump_measure,
    zero_amoeba,
    zero_density,
    zeros_in_box,
)
from amoebakit.errors import PreconditionError, UsageError
from amoebakit.num_kernels import Box, QuadratureSpec
from amoebakit.poly_core import ExponentialSum


def _sum(*terms):
    return ExponentialSum.from_terms(1, [([freq], coef) for freq, coef in terms])


@pytest.mark.parametrize(
    "s_values,per_unit",
    [((1, 2), 16), ((1, 2, 3), 16), ((1, 0.5, 20), 16), ((0, 10, 100), 16), ((1, 10, 100), 0)],
)
def test_ladder_validation(s_values, per_unit):
    with pytest.raises(UsageError):
        LadderSpec(s_values, per_unit)


def test_bohr_mean_of_cos_squared():
    result = bohr_mean(lambda x: np.cos(x[:, 0]) ** 2, LadderSpec((10, 100, 1000)))
    assert [s for s, _ in result.table] == [10.0, 100.0, 1000.0]
    assert result.estimate == pytest.approx(0.5, abs=1e-3)
    assert result.spread < 1e-2


@pytest.mark.parametrize("y", [-1.0, -0.25, 0.0, 0.5, 2.0])
def test_periodic_mean_is_exact(one_plus_exp, y):
    assert mean_log_modulus(one_plus_exp, [y]) == pytest.approx(max(0.0, -y), abs=1e-12)


def test_non_periodic_sum_needs_a_ladder():
    f = _sum((0.0, 3), (1.0, 1), (math.sqrt(2), 1))
    with pytest.raises(UsageError):
        mean_log_modulus(f, [0.0])


def test_non_periodic_mean_converges():
    # 3 + z1 + z2 has no zeros on the torus, so the mean is log 3
    f = _sum((0.0, 3), (1.0, 1), (math.sqrt(2), 1))
    value = mean_log_modulus(f, [0.0], LadderSpec((100, 1000, 3000)))
    assert value == pytest.approx(math.log(3), abs=2e-3)


def test_zeros_in_box(one_plus_exp):
    sample = zeros_in_box(one_plus_exp, Box(0, 10, -1, 1))
    assert sample.count == 2
    located = [z for z, _ in sample.zeros]
    assert [z.real for z in located] == pytest.approx([math.pi, 3 * math.pi], abs=1e-8)
    assert [z.imag for z in located] == pytest.approx([0.0, 0.0], abs=1e-8)
    assert all(m == 1 for _, m in sample.zeros)


def test_zero_free_box():
    f = _sum((0.0, 2), (1.0, 1))
    assert zeros_in_box(f, Box(-10, 10, 0, 1)).count == 0


def test_constant_sum_has_no_zeros():
    f = _sum((0.0, 2))
    assert zeros_in_box(f, Box(-1, 1, -1, 1)).zeros == ()


def test_zero_density_counts(one_plus_exp):
    est = zero_density(one_plus_exp, (-0.5, 0.5), LadderSpec((10, 50, 100)))
    assert est.counts == (4, 16, 32)
    assert [d for _, d in est.estimates] == pytest.approx([0.2, 0.16, 0.16])
    assert est.to_dict()["ladder"][0] == {"s": 10.0, "count": 4, "density": 0.2}


def test_zero_free_strip(one_plus_exp):
    est = zero_density(one_plus_exp, (0.5, 1.5), LadderSpec((10, 50, 100)))
    assert est.counts == (0, 0, 0)
    assert est.extrapolated == pytest.approx(0.0, abs=1e-12)


def test_strip_edge_too_close(one_plus_exp):
    with pytest.raises(PreconditionError):
        zero_density(one_plus_exp, (-0.05, 0.5), LadderSpec((10, 50, 100)))


def test_slope_jump_carries_density(one_plus_exp):
    jump = slope_jump_measure(one_plus_exp, np.linspace(-1, 1, 41))
    assert jump.total == pytest.approx(1 / (2 * math.pi), abs=1e-9)
    assert jump.mass_in(-0.1, 0.1) == pytest.approx(1 / (2 * math.pi), abs=1e-9)


def test_slope_jump_needs_uniform_grid(one_plus_exp):
    with pytest.raises(UsageError):
        slope_jump_measure(one_plus_exp, [0.0, 0.1, 0.3])


def test_pullback_matches_ronkin(shifted):
    deviation = pullback_consistency(shifted, [-1.0, 0.0, math.log(2), 1.0], QuadratureSpec(256, 1))
    assert deviation <= 1e-12


def test_zero_amoeba_raster():
    spec = GridSpec(((-2, 2),), 0.1)
    region = zero_amoeba([(complex(math.pi, -math.log(2)), 1), (complex(3 * math.pi, -math.log(2)), 1)], spec)
    assert region.cell_count == 2
    with pytest.raises(UsageError):
        zero_amoeba([], GridSpec(((-1, 1), (-1, 1)), 0.1))


def test_non_periodic_zero_free_strip():
    # 5 dominates e^{iz} + e^{i√2 z} on |Im z| ≤ 0.4, so the strip holds no zeros
    f = _sum((0.0, 5), (1.0, 1), (math.sqrt(2), 1))
    est = zero_density(f, (-0.3, 0.3), LadderSpec((20, 50, 200)))
    assert est.counts == (0, 0, 0)
    assert est.extrapolated == pytest.approx(0.0, abs=1e-12)


def test_unimodular_factor_keeps_the_zeros(one_plus_exp):
    plain = zeros_in_box(one_plus_exp, Box(0, 10, -1, 1))
    moved = zeros_in_box(one_plus_exp.shifted(0.5), Box(0, 10, -1, 1))
    assert moved.count == plain.count == 2
    assert sorted(z.real for z, _ in moved.zeros) == pytest.approx([math.pi, 3 * math.pi], abs=1e-8)


def test_mean_log_modulus_is_convex():
    # (2 + e^{iz})(1 + e^{iz}): M(y) = max(0, -y) + max(log 2, -y)
    f = _sum((0.0, 2), (1.0, 3), (2.0, 1))
    y = np.linspace(-1.5, 1.5, 31)
    jump = slope_jump_measure(f, y)
    assert jump.mean == pytest.approx(np.maximum(0, -y) + np.maximum(math.log(2), -y), abs=1e-9)
    assert np.diff(jump.mean, 2).min() >= -1e-4
    assert jump.total == pytest.approx(2 / (2 * math.pi), abs=1e-9)
    assert jump.mass_in(-0.85, -0.55) == pytest.approx(1 / (2 * math.pi), abs=1e-9)
    assert jump.mass_in(-0.15, 0.15) == pytest.approx(1 / (2 * math.pi), abs=1e-9)


def test_periodic_ladder_agrees_across_whole_periods():
    # log|1 + e^{ix}/2| has mean zero; boxes of 10 and 11 periods average it exactly
    g = lambda x: np.log(np.abs(1 + 0.5 * np.exp(1j * x[:, 0])))  # noqa: E731
    result = bohr_mean(g, LadderSpec((10 * math.pi, 11 * math.pi, 100 * math.pi)))
    values = [v for _, v in result.table]
    assert values[0] == pytest.approx(values[1], abs=1e-12)
    assert values == pytest.approx([0.0, 0.0, 0.0], abs=1e-12)
