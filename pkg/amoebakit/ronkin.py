"""Ronkin function N_P(y) = (2π)^{-n} ∫ log|P(e^{y+iθ})| dθ and the objects built on it."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .amoeba_geom import GridRegion, GridSpec, complement_components
from .errors import PreconditionError, SpecMismatchError
from .num_kernels import QuadratureSpec, adaptive_periodic_mean, aberth_batch, periodic_mean
from .poly_core import LaurentPolynomial, eval_fiber, restriction_rows
from .utils import parallel_map

logger = logging.getLogger(__name__)

SUPPORT_CELLS = 2.0


@dataclass(frozen=True, eq=False)
class RonkinField:
    spec: GridSpec
    values: np.ndarray
    quad_N: np.ndarray
    err_est: np.ndarray
    capped: np.ndarray

    @property
    def flagged(self) -> int:
        """Cells that hit the node cap: near the amoeba, reduced accuracy."""
        return int(self.capped.sum())


@dataclass(frozen=True, eq=False)
class MassGrid:
    spec: GridSpec
    mass: np.ndarray
    total: float

    @property
    def most_negative(self) -> float:
        return float(min(0.0, self.mass.min()))

    def to_dict(self) -> dict:
        return {"total_mass": self.total, "most_negative": self.most_negative, **self.spec.to_dict()}


@dataclass(frozen=True)
class SupportReport:
    outside_mass_fraction: float
    uncovered_amoeba_cells: int
    hausdorff_cells: float | None
    amoeba_cells: int
    support_cells: int


@dataclass(frozen=True)
class ComponentOrder:
    label: int
    order: tuple
    mean_gradient: tuple
    residual: float
    cells_used: int
    truncated: bool


def _inner_axis(P: LaurentPolynomial) -> int:
    spans = [P.degree_span(j) for j in range(P.n)]
    return int(np.argmax(spans))


def _jensen_rows(rows: np.ndarray, low: int, yj: float) -> np.ndarray:
    """Exact circle mean of log|Σ rows[k] z^{low+k}| over |z| = e^{yj}, one value per row."""
    out = np.full(rows.shape[0], -np.inf)
    nonzero = rows != 0
    alive = nonzero.any(axis=1)
    width = rows.shape[1]
    first = np.argmax(nonzero, axis=1)
    last = width - 1 - np.argmax(nonzero[:, ::-1], axis=1)
    for a, b in sorted(set(zip(first[alive].tolist(), last[alive].tolist()))):
        sel = np.flatnonzero(alive & (first == a) & (last == b))
        value = np.log(np.abs(rows[sel, b])) + (low + a) * yj
        if b > a:
            with np.errstate(divide="ignore"):
                logr = np.log(np.abs(aberth_batch(rows[sel, a : b + 1])))
            value = value + np.maximum(yj, logr).sum(axis=1)
        out[sel] = value
    return out


def _integrand(P: LaurentPolynomial, y: np.ndarray, fiberwise: bool):
    """Returns (g, axes): the torus integrand and the number of torus axes it runs over."""
    if fiberwise and any(P.depends_on(j) for j in range(P.n)):
        j = _inner_axis(P)
        y_other = np.delete(y, j)

        def g(theta):
            rows, low = restriction_rows(P, j, y_other + 1j * theta)
            return _jensen_rows(rows, low, y[j])

        return g, P.n - 1

    def g(theta):
        with np.errstate(divide="ignore"):
            return np.log(np.abs(eval_fiber(P, y, theta)))

    return g, P.n


def ronkin_value(P: LaurentPolynomial, y, quad: QuadratureSpec | None = None, fiberwise: bool = True) -> float:
    """N_P(y) by the uniform rule with ``quad.nodes_per_axis`` nodes."""
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    g, axes = _integrand(P, y, fiberwise)
    nodes = quad.nodes_per_axis if quad is not None else 256
    return periodic_mean(g, QuadratureSpec(nodes, axes))


def ronkin_field(
    P: LaurentPolynomial,
    spec: GridSpec,
    quad: QuadratureSpec | None = None,
    *,
    err_target: float = 1e-6,
    cap: int = 2**13,
    adaptive: bool = True,
    fiberwise: bool = True,
    threads: int = 1,
) -> RonkinField:
    """N_P at every cell center; err_est compares against the N/2 rule."""
    if spec.n != P.n:
        raise SpecMismatchError(f"grid dimension {spec.n} does not match polynomial dimension {P.n}")
    start = quad.nodes_per_axis if quad is not None else 64

    def cell(y):
        g, axes = _integrand(P, y, fiberwise)
        return adaptive_periodic_mean(g, axes, start, cap, err_target, adaptive)

    estimates = parallel_map(cell, spec.centers(), threads)
    shape = spec.shape
    field = RonkinField(
        spec=spec,
        values=np.array([e.value for e in estimates]).reshape(shape),
        quad_N=np.array([e.nodes for e in estimates]).reshape(shape),
        err_est=np.array([e.err_est for e in estimates]).reshape(shape),
        capped=np.array([e.capped for e in estimates]).reshape(shape),
    )
    if field.flagged:
        logger.warning("%d cell(s) reached the quadrature cap: near-amoeba, reduced accuracy", field.flagged)
    return field


def gradient_field(field: RonkinField) -> np.ndarray:
    """Per-cell gradient vectors, shape (*grid shape, n)."""
    if min(field.spec.shape) < 3:
        raise PreconditionError("gradient needs at least 3 cells per axis")
    grads = np.gradient(field.values, field.spec.h)
    if field.spec.n == 1:
        grads = [grads]
    return np.stack(grads, axis=-1)


def second_difference_mass(values: np.ndarray, h: float) -> np.ndarray:
    """Σ_j second central differences / h² · h^n on interior cells, zero on the boundary."""
    n = values.ndim
    lap = np.zeros_like(values)
    interior = tuple(slice(1, -1) for _ in range(n))
    for axis in range(n):
        fwd = np.roll(values, -1, axis=axis)
        back = np.roll(values, 1, axis=axis)
        lap[interior] += (fwd - 2 * values + back)[interior]
    return lap / h**2 * h**n


def laplacian_mass(field: RonkinField) -> MassGrid:
    """Discrete dd^c N_P as a cell measure: z − a carries total mass 1."""
    if min(field.spec.shape) < 3:
        raise PreconditionError("laplacian needs at least 3 cells per axis")
    mass = second_difference_mass(field.values, field.spec.h)
    return MassGrid(field.spec, mass, float(mass.sum()))


def convexity_margin(field: RonkinField) -> float:
    """Smallest second difference / (1 + |value|) over the axes and the 2D diagonals."""
    v = field.values
    n = v.ndim
    directions = [tuple(int(i == a) for i in range(n)) for a in range(n)]
    for a in range(n):
        for b in range(a + 1, n):
            for sign in (1, -1):
                directions.append(tuple(1 if i == a else sign if i == b else 0 for i in range(n)))
    interior = tuple(slice(1, -1) for _ in range(n))
    worst = math.inf
    for d in directions:
        fwd = np.roll(v, [-s for s in d], axis=tuple(range(n)))
        back = np.roll(v, list(d), axis=tuple(range(n)))
        second = (fwd - 2 * v + back)[interior]
        if second.size:
            worst = min(worst, float((second / (1 + np.abs(v[interior]))).min()))
    return worst


def support_compare(mass: MassGrid, amoeba: GridRegion, tau_mass: float = 1e-4) -> SupportReport:
    """Compare the mass support with the amoeba raster, distances measured in cells."""
    mass.spec.require_same(amoeba.spec)
    occupied = amoeba.occupancy
    support = mass.mass > tau_mass
    positive = np.clip(mass.mass, 0.0, None)
    total = positive.sum()

    dist_to_amoeba = ndimage.distance_transform_edt(~occupied) if occupied.any() else np.full(occupied.shape, np.inf)
    dist_to_support = ndimage.distance_transform_edt(~support) if support.any() else np.full(occupied.shape, np.inf)

    outside = float(positive[dist_to_amoeba > SUPPORT_CELLS].sum() / total) if total > 0 else 0.0
    uncovered = int((occupied & (dist_to_support > SUPPORT_CELLS)).sum())
    if not occupied.any() and not support.any():
        hausdorff = 0.0
    elif occupied.any() and support.any():
        hausdorff = float(max(dist_to_amoeba[support].max(), dist_to_support[occupied].max()))
    else:
        hausdorff = None
    return SupportReport(outside, uncovered, hausdorff, int(occupied.sum()), int(support.sum()))


def component_orders(field: RonkinField, region: GridRegion, erode: int = 2) -> list[ComponentOrder]:
    """Affine fit of N_P over each complement component (eroded by ``erode`` cells)."""
    field.spec.require_same(region.spec)
    grads = gradient_field(field)
    centers = field.spec.centers().reshape(*field.spec.shape, field.spec.n)
    orders = []
    for comp in complement_components(region):
        mask = comp.mask(field.spec)
        core = ndimage.binary_erosion(mask, iterations=erode) if erode else mask
        if not core.any():
            core = mask
        pts = centers[core]
        design = np.column_stack([pts, np.ones(len(pts))])
        coef, *_ = np.linalg.lstsq(design, field.values[core], rcond=None)
        residual = float(np.abs(design @ coef - field.values[core]).max())
        orders.append(
            ComponentOrder(
                label=comp.label,
                order=tuple(float(c) for c in coef[:-1]),
                mean_gradient=tuple(float(g) for g in grads[core].mean(axis=0)),
                residual=residual,
                cells_used=int(core.sum()),
                truncated=comp.truncated,
            )
        )
    return orders
