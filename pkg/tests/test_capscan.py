import math

import numpy as np
import pytest

from amoebakit.amoeba_geom import GridRegion, GridSpec
from amoebakit.capscan import (
    EPS_STEPS,
    CapCertificate,
    HartogsFigure,
    cap_to_hartogs,
    eps_grid,
    hartogs_check,
    scan_caps,
    scan_hartogs,
    verify_cap,
)
from amoebakit.errors import NotConvertibleError, UsageError, WindowOverflowError


def _cert(base, radius=0.125, margin=0.05, direction=(0.0, 1.0), eps_max=0.2):
    return CapCertificate(1, ((1.0, 0.0),), base, radius, margin, direction, eps_max, (0,))


def test_point_has_verified_line_caps(point_region):
    report = scan_caps(point_region, 1)
    assert report.certificates
    assert report.candidates == len(report.certificates)
    assert all(verify_cap(point_region, c).passed for c in report.certificates)
    assert report.to_dict()["family"]["planes"] == "axis-aligned"


def test_cap_converts_to_a_hartogs_witness(point_region):
    cert = scan_caps(point_region, 1).certificates[0]
    fig = cap_to_hartogs(cert, point_region)
    check = hartogs_check(point_region, fig)
    assert (check.figure_clear, check.hull_meets) == (True, True)


def test_point_has_no_plane_caps(point_region):
    assert scan_caps(point_region, 2).certificates == ()


def test_full_dimensional_cap_is_not_convertible(point_region):
    cert = CapCertificate(2, ((1.0, 0.0), (0.0, 1.0)), (0.025, 0.025), 0.2, 0.05, (1.0, 0.0), 0.2)
    with pytest.raises(NotConvertibleError):
        cap_to_hartogs(cert, point_region)


def test_caps_move_with_the_raster(point_region):
    offset = np.array([3, -2]) * point_region.spec.h
    moved = GridRegion(point_region.spec.translated(offset), point_region.occupancy, point_region.dilation_r)
    for cert in scan_caps(point_region, 1).certificates:
        assert verify_cap(moved, cert.translated(offset)).passed


def test_cap_away_from_the_set_is_empty(point_region):
    check = verify_cap(point_region, _cert((-0.5, -0.5)))
    assert not check.passed
    assert "empty" in check.failures


def test_translation_into_the_set_fails(point_region):
    check = verify_cap(point_region, _cert((0.025, -0.125), direction=(0.0, 1.0)))
    assert any(f.startswith("translate:") for f in check.failures)


def test_cap_outside_the_window(point_region):
    with pytest.raises(WindowOverflowError):
        verify_cap(point_region, _cert((0.9, 0.0), radius=0.2))


@pytest.mark.parametrize("margin", [0.0, 0.125, 0.3])
def test_cap_margin_must_be_inside_the_radius(margin):
    with pytest.raises(UsageError):
        _cert((0.0, 0.0), margin=margin)


def test_empty_region_has_no_witness():
    spec = GridSpec(((-1, 1), (-1, 1)), 0.1)
    empty = GridRegion(spec, np.zeros(spec.shape, dtype=bool), 0.1)
    fig = HartogsFigure(1, 0.5, 0.5, (0.0, 0.0), ((1.0, 0.0),), ((0.0, 1.0),), 0.2, 0.2, (0.0, 0.0))
    check = hartogs_check(empty, fig)
    assert check.figure_clear and not check.hull_meets
    assert not check.witness


def test_filled_window_has_no_hartogs_figures():
    spec = GridSpec(((-1, 1), (-1, 1)), 0.1)
    full = GridRegion(spec, np.ones(spec.shape, dtype=bool), 0.1)
    assert scan_hartogs(full, 1) == []


def test_point_has_hartogs_figures(point_region):
    figures = scan_hartogs(point_region, 1)
    assert figures
    assert all(hartogs_check(point_region, f).witness for f in figures)


def test_eps_grid():
    eps = eps_grid(0.1, 0.4)
    assert len(eps) == EPS_STEPS
    assert eps[0] == pytest.approx(0.05)
    assert eps[-1] == pytest.approx(0.4)


def test_dimension_ranges(point_region):
    with pytest.raises(UsageError):
        scan_caps(point_region, 0)
    with pytest.raises(UsageError):
        scan_caps(point_region, 3)
    with pytest.raises(UsageError):
        scan_hartogs(point_region, 2)


@pytest.fixture
def line_region():
    """The horizontal line y = 0.025 across the whole window."""
    spec = GridSpec(((-1.0, 1.0), (-1.0, 1.0)), 0.05)
    occupancy = np.zeros(spec.shape, dtype=bool)
    occupancy[:, 20] = True
    return GridRegion(spec, occupancy, spec.h * math.sqrt(2))


def _with_extra_cell(region, index):
    occupancy = region.occupancy.copy()
    occupancy[index] = True
    return GridRegion(region.spec, occupancy, region.dilation_r)


def test_cap_along_the_line_fails_the_margin(line_region):
    check = verify_cap(line_region, _cert((0.025, 0.025)))
    assert "margin" in check.failures
    assert not check.passed


def test_line_has_no_caps(line_region):
    assert scan_caps(line_region, 1).certificates == ()


def test_failures_persist_on_a_larger_set(point_region, line_region):
    cert = _cert((0.025, -0.125), direction=(0.0, 1.0))
    assert any(f.startswith("translate:") for f in verify_cap(point_region, cert).failures)
    larger = _with_extra_cell(point_region, (5, 30))
    assert any(f.startswith("translate:") for f in verify_cap(larger, cert).failures)

    cert = _cert((0.025, 0.025))
    larger = _with_extra_cell(line_region, (30, 5))
    assert "margin" in verify_cap(larger, cert).failures
