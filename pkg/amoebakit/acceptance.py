"""Acceptance suite behind ``verify``: concrete instances with exact or derived oracles.

Each criterion returns a JSON-ready dict; runtimes go to the log only, so the
suite output is byte-identical across thread counts and repeated runs.
"""

from __future__ import annotations

import logging
import math
import time

import numpy as np

from .amoeba_geom import FiberGrid, GridRegion, GridSpec, PointCloud, complement_components, convexity_check_region, rasterize, sample_amoeba, sample_curve_amoeba
from .ap_mean import pullback_consistency, slope_jump_measure, zero_density
from .capscan import cap_to_hartogs, hartogs_check, scan_caps, verify_cap
from .config import RunConfig
from .errors import AmoebaError
from .num_kernels import QuadratureSpec
from .poly_core import ExponentialSum, LaurentPolynomial
from .ronkin import component_orders, convexity_margin, laplacian_mass, ronkin_field, ronkin_value, support_compare
from .utils import dumps, task_rng

logger = logging.getLogger(__name__)

# Mahler measure of 1 + z1 + z2
LINE_MAHLER = 0.3230659472194505
SQUARE = ((-3.0, 3.0), (-3.0, 3.0))


def monomial() -> LaurentPolynomial:
    return LaurentPolynomial.from_terms(2, [([2, -1], 3.0)])


def shifted_linear() -> LaurentPolynomial:
    return LaurentPolynomial.from_terms(1, [([1], 1.0), ([0], -2.0)])


def line() -> LaurentPolynomial:
    return LaurentPolynomial.from_terms(2, [([0, 0], 1.0), ([1, 0], 1.0), ([0, 1], 1.0)])


def _field(config: RunConfig, P, spec, threads, err_target=None):
    return ronkin_field(
        P,
        spec,
        QuadratureSpec(config.quad_nodes, P.n - 1 if config.fiberwise else P.n),
        err_target=err_target or config.err_target,
        cap=config.quad_cap,
        adaptive=config.adaptive,
        fiberwise=config.fiberwise,
        threads=threads,
    )


class Suite:
    """Runs the criteria in order, sharing the expensive fields between them."""

    def __init__(self, config: RunConfig, threads: int | None = None):
        self.config = config
        self.threads = threads if threads is not None else config.threads
        self._cache = {}

    def cached(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    # Convexity needs second differences well below 1e-6, so fields run at a tighter target.
    def line_field(self):
        spec = GridSpec(SQUARE, 0.05)
        return self.cached("line_field", lambda: _field(self.config, line(), spec, self.threads, self.config.err_target / 100))

    def line_region(self):
        def build():
            spec = GridSpec(SQUARE, 0.05)
            cloud = sample_amoeba(line(), FiberGrid.for_grid(spec, self.config.fiber_args), self.threads)
            return rasterize(cloud, spec)

        return self.cached("line_region", build)

    def jensen_field(self):
        spec = GridSpec(((-2.0, 2.0),), 0.01)
        return self.cached("jensen_field", lambda: _field(self.config, shifted_linear(), spec, self.threads))

    def plain_jensen_field(self):
        """z − 2 by the fixed n-axis torus rule at quad_nodes·64 nodes, no refinement."""
        spec = GridSpec(((-2.0, 2.0),), 0.01)
        quad = QuadratureSpec(self.config.quad_nodes * 64, 1)

        def build():
            return ronkin_field(shifted_linear(), spec, quad, adaptive=False, fiberwise=False, threads=self.threads)

        return self.cached("plain_jensen_field", build)

    # 1
    def monomial_exactness(self) -> dict:
        P = monomial()
        spec = GridSpec(SQUARE, 0.12)
        field = _field(self.config, P, spec, self.threads)
        y = spec.centers()
        exact = (math.log(3.0) + 2 * y[:, 0] - y[:, 1]).reshape(spec.shape)
        error = float(np.abs(field.values - exact).max())
        region = rasterize(sample_amoeba(P, FiberGrid.for_grid(spec, self.config.fiber_args), self.threads), spec)
        mass = abs(laplacian_mass(field).total)
        return {
            "passed": error <= 1e-12 and region.cell_count == 0 and mass <= 1e-10,
            "max_error": error,
            "amoeba_cells": region.cell_count,
            "mass_total": mass,
        }

    # 2
    def jensen_oracle(self) -> dict:
        field = self.jensen_field()
        y = field.spec.axis_centers(0)
        kink = math.log(2.0)
        away = np.abs(y - kink) >= 0.05
        error = float(np.abs(field.values - np.maximum(y, kink))[away].max())
        mass = laplacian_mass(field)
        outside = float(np.abs(mass.mass[np.abs(y - kink) > 3 * field.spec.h]).sum())
        return {
            "passed": error <= 1e-6 and abs(mass.total - 1) <= 1e-3 and outside <= 1e-9,
            "max_error": error,
            "mass_total": mass.total,
            "mass_outside_3_cells": outside,
        }

    # 3
    def three_tentacles(self) -> dict:
        field = self.line_field()
        region = self.line_region()
        components = complement_components(region)
        violations = [len(convexity_check_region(c, region)) for c in components]

        targets = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        orders = component_orders(field, region)
        matched, order_error = set(), 0.0
        for item in orders:
            d = np.abs(targets - np.array(item.order)).max(axis=1)
            matched.add(int(np.argmin(d)))
            order_error = max(order_error, float(d.min()))

        n1, n2 = 2**12, 2**13
        v1 = ronkin_value(line(), [0.0, 0.0], QuadratureSpec(n1, 1), self.config.fiberwise)
        v2 = ronkin_value(line(), [0.0, 0.0], QuadratureSpec(n2, 1), self.config.fiberwise)
        agreement = abs(v1 - v2)

        support = support_compare(laplacian_mass(field), region, self.config.tau_mass)
        uncovered = support.uncovered_amoeba_cells / max(1, support.amoeba_cells)
        return {
            "passed": (
                len(components) == 3
                and not any(violations)
                and len(matched) == 3
                and order_error <= 1e-3
                and agreement <= 1e-5
                and abs(v2 - LINE_MAHLER) <= 1e-5
                and support.outside_mass_fraction <= 1e-2
                and uncovered <= 0.01
            ),
            "components": len(components),
            "violations": violations,
            "orders": [list(o.order) for o in orders],
            "order_error": order_error,
            "origin_value": [n1, v1, n2, v2],
            "quadrature_agreement": agreement,
            "outside_mass_fraction": support.outside_mass_fraction,
            "uncovered_fraction": uncovered,
            "flagged_cells": self.line_field().flagged,
        }

    # 4
    def convexity_sweep(self) -> dict:
        Q = LaurentPolynomial.from_terms(2, [([1, 0], 1.0), ([0, 0], -2.0)])
        product = line() * Q
        spec = GridSpec(SQUARE, 0.1)
        plain = self.plain_jensen_field()
        margins = {
            "z-2": convexity_margin(self.jensen_field()),
            "z-2 plain": convexity_margin(plain),
            "1+z1+z2": convexity_margin(self.line_field()),
            "(1+z1+z2)(z1-2)": convexity_margin(_field(self.config, product, spec, self.threads, self.config.err_target / 100)),
        }
        quad = QuadratureSpec(self.config.quad_nodes * 16, 1)
        points = np.linspace(-2.3, 2.1, 20)
        law = 0.0
        for a, b in zip(points, points[::-1]):
            y = [a, 0.7 * b]
            lhs = ronkin_value(product, y, quad, self.config.fiberwise)
            rhs = ronkin_value(line(), y, quad, self.config.fiberwise) + ronkin_value(Q, y, quad, self.config.fiberwise)
            law = max(law, abs(lhs - rhs))
        return {
            "passed": min(margins.values()) >= -1e-6 and law <= 1e-8,
            "margins": margins,
            "plain_nodes": int(plain.quad_N.max()),
            "product_law": law,
        }

    # 5
    def zero_density(self) -> dict:
        f = ExponentialSum.from_terms(1, [([0.0], 1.0), ([1.0], 1.0)])
        ladder = self.config.ladder_spec()
        target = 1 / (2 * math.pi)
        inside = zero_density(f, (-0.5, 0.5), ladder, threads=self.threads)
        free = zero_density(f, (0.5, 1.5), ladder, threads=self.threads)
        density = inside.estimates[-1][1]
        jump = slope_jump_measure(f, np.linspace(-0.5, 0.5, 101)).mass_in(-0.5, 0.5)
        return {
            "passed": abs(density - target) <= 0.02 * target and free.counts[-1] == 0 and abs(jump - density) <= 0.02 * density,
            "density": density,
            "zero_free_count": free.counts[-1],
            "slope_jump": jump,
        }

    # 6
    def pullback_identity(self) -> dict:
        nodes = self.config.quad_nodes * 32
        ys = np.linspace(-2.0, 2.0, 20).reshape(-1, 1)
        grid = np.array([[a, b] for a in np.linspace(-2.0, 2.0, 5) for b in np.linspace(-1.9, 1.9, 4)])
        deviations = {
            "z-2": pullback_consistency(shifted_linear(), ys, QuadratureSpec(nodes, 1)),
            "1+z1+z2": pullback_consistency(line(), grid, QuadratureSpec(nodes, 2)),
        }
        return {"passed": max(deviations.values()) <= 1e-5, "deviations": deviations}

    # 7
    def cap_scanner(self) -> dict:
        spec = GridSpec(((-1.0, 1.0), (-1.0, 1.0)), 0.05)
        point = rasterize(PointCloud(2, np.array([[0.025, 0.025]])), spec)
        caps = scan_caps(point, 1, threads=self.threads)
        verified = bool(caps.certificates) and all(verify_cap(point, c).passed for c in caps.certificates)
        witness = None
        if caps.certificates:
            try:
                fig = cap_to_hartogs(caps.certificates[0], point)
                check = hartogs_check(point, fig)
                witness = [check.figure_clear, check.hull_meets]
            except AmoebaError as e:
                logger.warning("cap conversion failed: %s", e)

        # whole-cell translations move certificates with the raster
        offset = task_rng(self.config.seed, 7).integers(-6, 7, size=2) * spec.h
        moved = GridRegion(spec.translated(offset), point.occupancy, point.dilation_r)
        equivariant = bool(caps.certificates) and verify_cap(moved, caps.certificates[0].translated(offset)).passed

        planes = scan_caps(point, 2, threads=self.threads)
        line_caps = scan_caps(self.line_region(), 1, threads=self.threads)

        cube = GridSpec(((-3.0, 3.0),) * 3, 0.1)
        P1 = LaurentPolynomial.from_terms(3, [([0, 0, 0], 1.0), ([1, 0, 0], 1.0), ([0, 1, 0], 1.0)])
        P2 = LaurentPolynomial.from_terms(3, [([0, 0, 0], 1.0), ([1, 0, 0], 1.0), ([0, 0, 1], 1.0)])
        curve = sample_curve_amoeba(P1, P2, FiberGrid.for_grid(cube, min(256, self.config.fiber_args)), self.threads)
        curve_caps = scan_caps(rasterize(curve, cube), 2, threads=self.threads)
        return {
            "passed": (
                verified
                and witness == [True, True]
                and equivariant
                and not planes.certificates
                and not line_caps.certificates
                and not curve_caps.certificates
            ),
            "point_k1": len(caps.certificates),
            "point_witness": witness,
            "translation_equivariant": equivariant,
            "point_k2": len(planes.certificates),
            "line_k1": len(line_caps.certificates),
            "curve_k2": len(curve_caps.certificates),
        }

    # 8
    def determinism(self) -> dict:
        """A reduced pipeline at 1 and at 4 threads must serialize identically."""
        spec = GridSpec(((-1.5, 1.5), (-1.5, 1.5)), 0.1)

        def pipeline(threads):
            field = _field(self.config, line(), spec, threads)
            region = rasterize(sample_amoeba(line(), FiberGrid.for_grid(spec, 256), threads), spec)
            return dumps({"values": field.values, "occupancy": region.occupancy.astype(int)})

        return {"passed": pipeline(1) == pipeline(4), "threads": [1, 4]}


CRITERIA = (
    ("monomial_exactness", Suite.monomial_exactness),
    ("jensen_oracle", Suite.jensen_oracle),
    ("three_tentacles", Suite.three_tentacles),
    ("convexity_sweep", Suite.convexity_sweep),
    ("zero_density", Suite.zero_density),
    ("pullback_identity", Suite.pullback_identity),
    ("cap_scanner", Suite.cap_scanner),
    ("determinism", Suite.determinism),
)


def run_suite(config: RunConfig, threads: int | None = None, only=None) -> dict:
    """Run the criteria (optionally a subset by name) and collect a pass/fail report."""
    suite = Suite(config, threads)
    results = []
    for number, (name, check) in enumerate(CRITERIA, start=1):
        if only and name not in only:
            continue
        started = time.perf_counter()
        try:
            details = check(suite)
        except AmoebaError as e:
            logger.error("criterion %d (%s) raised %s: %s", number, name, type(e).__name__, e)
            details = {"passed": False, "error": f"{type(e).__name__}: {e}"}
        logger.info(
            "criterion %d %s: %s (%.1fs)", number, name, "pass" if details["passed"] else "FAIL", time.perf_counter() - started
        )
        results.append({"id": number, "name": name, **details})
    return {"passed": all(r["passed"] for r in results), "criteria": results}
