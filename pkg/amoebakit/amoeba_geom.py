"""Amoebas as point clouds and rasters.

Log V is sampled fiber by fiber: the other coordinates run over a grid of
moduli and arguments, the restricted one-variable polynomial is solved and
every nonzero root contributes one point. Rasters are boolean cell grids over
an axis-aligned window in R^n, indexed in C order.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.spatial import Delaunay, QhullError, cKDTree

from .errors import DegenerateFiberError, DegenerateInputError, PreconditionError, SpecMismatchError, UsageError
from .num_kernels import QuadratureSpec, aberth_batch, eliminate, fiber_minimize, newton_polish, roots_univariate
from .poly_core import LaurentPolynomial, restriction_rows
from .utils import parallel_map, task_rng

logger = logging.getLogger(__name__)

FIBER_CHUNK = 1 << 16
DEGENERATE_LIMIT = 0.01
CURVE_RESIDUAL = 1e-8
CURVE_COND = 1e8


@dataclass(frozen=True)
class GridSpec:
    window: tuple
    h: float

    def __post_init__(self):
        window = tuple((float(lo), float(hi)) for lo, hi in self.window)
        object.__setattr__(self, "window", window)
        if self.h <= 0:
            raise UsageError(f"grid spacing must be positive, got {self.h}")
        for lo, hi in window:
            if not lo < hi:
                raise UsageError(f"window axis ({lo}, {hi}) needs lo < hi")
        if min(self.shape) < 2:
            raise UsageError("grid needs at least 2 cells per axis")

    @property
    def n(self) -> int:
        return len(self.window)

    @property
    def shape(self) -> tuple:
        return tuple(int(round((hi - lo) / self.h)) for lo, hi in self.window)

    @property
    def cell_count(self) -> int:
        return math.prod(self.shape)

    @property
    def lo(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.window])

    @property
    def hi(self) -> np.ndarray:
        return np.array([hi for _, hi in self.window])

    def axis_centers(self, axis: int) -> np.ndarray:
        lo, _ = self.window[axis]
        return lo + (np.arange(self.shape[axis]) + 0.5) * self.h

    def centers(self) -> np.ndarray:
        """All cell centers, shape (cell_count, n), C order."""
        mesh = np.meshgrid(*(self.axis_centers(i) for i in range(self.n)), indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])

    def cell_of(self, points) -> np.ndarray:
        """Integer cell indices of points (may fall outside the grid)."""
        return np.floor((np.atleast_2d(points) - self.lo) / self.h).astype(np.int64)

    def translated(self, offset) -> "GridSpec":
        offset = np.asarray(offset, dtype=np.float64)
        return GridSpec(tuple((lo + o, hi + o) for (lo, hi), o in zip(self.window, offset)), self.h)

    def require_same(self, other: "GridSpec") -> None:
        if self.shape != other.shape or not np.allclose(self.lo, other.lo) or not np.isclose(self.h, other.h):
            raise SpecMismatchError(f"grid mismatch: {self.to_dict()} vs {other.to_dict()}")

    def to_dict(self) -> dict:
        return {"window": [list(axis) for axis in self.window], "h": self.h, "shape": list(self.shape)}


@dataclass(frozen=True)
class FiberGrid:
    """Moduli window (log scale, per axis), moduli step and argument samples per fiber."""

    window: tuple
    step: float
    args: int = 1024

    @classmethod
    def for_grid(cls, spec: GridSpec, args: int = 1024) -> "FiberGrid":
        return cls(window=spec.window, step=spec.h / 2, args=args)

    def moduli(self, axis: int) -> np.ndarray:
        lo, hi = self.window[axis]
        count = int(np.floor((hi - lo) / self.step + 1e-9)) + 1
        return lo + np.arange(count) * self.step

    def arguments(self, axes: int) -> np.ndarray:
        """Argument samples for ``axes`` torus coordinates, (k, axes) in C order."""
        if axes == 0:
            return np.zeros((1, 0))
        per_axis = max(8, int(round(self.args ** (1.0 / axes))))
        grid = 2 * np.pi * np.arange(per_axis) / per_axis
        mesh = np.meshgrid(*([grid] * axes), indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])

    def to_dict(self) -> dict:
        return {"window": [list(a) for a in self.window], "step": self.step, "args": self.args}


@dataclass(frozen=True, eq=False)
class PointCloud:
    n: int
    points: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.points)

    def inside(self, window) -> np.ndarray:
        """Mask of points inside ``window``; the rest are retained but flagged."""
        if len(self.points) == 0:
            return np.zeros(0, dtype=bool)
        lo = np.array([a for a, _ in window])
        hi = np.array([b for _, b in window])
        return np.all((self.points >= lo) & (self.points <= hi), axis=1)


def _flag_outside(cloud: PointCloud, window) -> PointCloud:
    cloud.meta["outside_window"] = int((~cloud.inside(window)).sum())
    return cloud


@dataclass(frozen=True, eq=False)
class GridRegion:
    spec: GridSpec
    occupancy: np.ndarray
    dilation_r: float = 0.0
    ignored: int = 0

    def __post_init__(self):
        if self.occupancy.shape != self.spec.shape:
            raise SpecMismatchError(f"occupancy shape {self.occupancy.shape} does not match grid {self.spec.shape}")

    @property
    def cell_count(self) -> int:
        return int(self.occupancy.sum())

    def occupied_centers(self) -> np.ndarray:
        return self.spec.centers()[self.occupancy.ravel()]

    def union(self, other: "GridRegion") -> "GridRegion":
        self.spec.require_same(other.spec)
        return GridRegion(self.spec, self.occupancy | other.occupancy, max(self.dilation_r, other.dilation_r))

    def to_dict(self) -> dict:
        return {**self.spec.to_dict(), "dilation_r": self.dilation_r, "occupied": self.cell_count, "ignored": self.ignored}


@dataclass(frozen=True, eq=False)
class MembershipField:
    spec: GridSpec
    values: np.ndarray
    tau: float

    def region(self) -> np.ndarray:
        return self.values <= self.tau


@dataclass(frozen=True)
class MembershipCheck:
    """Disagreements between a raster and the membership field on the same grid."""

    occupied_above_tau: int
    stray_zero_cells: int

    @property
    def consistent(self) -> bool:
        return self.occupied_above_tau == 0 and self.stray_zero_cells == 0


@dataclass(frozen=True, eq=False)
class Component:
    label: int
    cells: np.ndarray
    truncated: bool

    @property
    def size(self) -> int:
        return len(self.cells)

    def centers(self, spec: GridSpec) -> np.ndarray:
        return spec.lo + (self.cells + 0.5) * spec.h

    def mask(self, spec: GridSpec) -> np.ndarray:
        out = np.zeros(spec.shape, dtype=bool)
        out[tuple(self.cells.T)] = True
        return out


@dataclass(frozen=True)
class Violation:
    first: tuple
    second: tuple
    blocker: tuple


def _solve_fibers(P: LaurentPolynomial, j: int, log_w: np.ndarray) -> tuple[np.ndarray, int]:
    """Log of all nonzero roots in z_j for a batch of fibers; returns (points, degenerate count)."""
    rows, _ = restriction_rows(P, j, log_w)
    nonzero = rows != 0
    alive = nonzero.any(axis=1)
    width = rows.shape[1]
    first = np.argmax(nonzero, axis=1)
    last = width - 1 - np.argmax(nonzero[:, ::-1], axis=1)
    chunks = []
    for a, b in sorted(set(zip(first[alive].tolist(), last[alive].tolist()))):
        if b == a:
            continue
        sel = np.flatnonzero(alive & (first == a) & (last == b))
        roots = aberth_batch(rows[sel, a : b + 1])
        with np.errstate(divide="ignore"):
            yj = np.log(np.abs(roots))
        base = np.repeat(log_w.real[sel], roots.shape[1], axis=0)
        yj = yj.ravel()
        keep = np.isfinite(yj)
        chunks.append(np.insert(base[keep], j, yj[keep], axis=1))
    points = np.concatenate(chunks) if chunks else np.zeros((0, P.n))
    return points, int((~alive).sum())


def _fiber_blocks(grid: FiberGrid, others: list[int]):
    args = grid.arguments(len(others))
    if others:
        mesh = np.meshgrid(*(grid.moduli(i) for i in others), indexing="ij")
        moduli = np.column_stack([m.ravel() for m in mesh])
    else:
        moduli = np.zeros((1, 0))
    per_block = max(1, FIBER_CHUNK // len(args))
    for start in range(0, len(moduli), per_block):
        block = moduli[start : start + per_block]
        yield np.repeat(block, len(args), axis=0) + 1j * np.tile(args, (len(block), 1))


def sample_hypersurface(P: LaurentPolynomial, j: int, fiber_grid: FiberGrid, threads: int = 1) -> PointCloud:
    """Sample Log V(P) by solving for z_j over the fiber grid of the other axes."""
    if not 0 <= j < P.n:
        raise UsageError(f"axis {j} out of range for n={P.n}")
    if not P.depends_on(j):
        raise PreconditionError(f"polynomial does not depend on z{j + 1}")
    if len(fiber_grid.window) != P.n:
        raise UsageError("fiber grid window must have one axis per variable")

    candidates = [j] + [a for a in range(j + 1, P.n) if P.depends_on(a)] + [a for a in range(j) if P.depends_on(a)]
    for axis in candidates:
        others = [i for i in range(P.n) if i != axis]
        blocks = list(_fiber_blocks(fiber_grid, others))
        results = parallel_map(lambda lw, axis=axis: _solve_fibers(P, axis, lw), blocks, threads)
        total = sum(len(b) for b in blocks)
        degenerate = sum(d for _, d in results)
        if degenerate <= DEGENERATE_LIMIT * total:
            break
        logger.warning("%d of %d fibers degenerate along z%d, rotating axis", degenerate, total, axis + 1)
    points = np.concatenate([p for p, _ in results]) if results else np.zeros((0, P.n))
    meta = {
        "polynomial": str(P),
        "axis": axis,
        "fiber_grid": fiber_grid.to_dict(),
        "fibers": total,
        "degenerate_fibers": degenerate,
    }
    logger.info("sampled %d points on z%d (%d degenerate fibers)", len(points), axis + 1, degenerate)
    return _flag_outside(PointCloud(P.n, points, meta), fiber_grid.window)


def sample_amoeba(P: LaurentPolynomial, fiber_grid: FiberGrid, threads: int = 1) -> PointCloud:
    """Union of hypersurface samples over every axis the polynomial depends on."""
    axes = [j for j in range(P.n) if P.depends_on(j)]
    if not axes:
        return PointCloud(P.n, np.zeros((0, P.n)), {"polynomial": str(P), "axes": [], "outside_window": 0})
    clouds = [sample_hypersurface(P, j, fiber_grid, threads) for j in axes]
    points = np.concatenate([c.points for c in clouds])
    meta = {"polynomial": str(P), "axes": axes, "parts": [c.meta for c in clouds]}
    return _flag_outside(PointCloud(P.n, points, meta), fiber_grid.window)


def _system_jacobian(polys, axes):
    exps = [P.exponents.astype(np.float64) for P in polys]
    coefs = [P.coefficients for P in polys]

    def values(z):
        logz = np.log(z)
        return np.array([np.exp(e @ logz) @ c for e, c in zip(exps, coefs)])

    def jacobian(z):
        logz = np.log(z)
        rows = []
        for e, c in zip(exps, coefs):
            t = np.exp(e @ logz) * c
            rows.append([(t * e[:, a]).sum() / z[a] for a in axes])
        return np.array(rows)

    return values, jacobian


def _curve_fiber(P1, P2, u_axis, v_axis, param_axis, zp) -> tuple[list, bool]:
    fixed = np.ones(3, dtype=np.complex128)
    fixed[param_axis] = zp
    try:
        resultant = eliminate(P1, P2, u_axis, v_axis, fixed)
    except DegenerateFiberError:
        return [], True
    if len(resultant) < 2:
        return [], False
    u_roots = roots_univariate(resultant).roots
    u_roots = u_roots[np.abs(u_roots) > 1e-12]

    values, jacobian = _system_jacobian((P1, P2), (u_axis, v_axis))
    accepted = []
    for u in u_roots:
        z = fixed.copy()
        z[u_axis] = u
        v_roots = np.zeros(0, dtype=np.complex128)
        for P in (P1, P2):
            if not P.depends_on(v_axis):
                continue
            w = np.delete(z, v_axis)
            rows, low = restriction_rows(P, v_axis, np.log(w)[None, :])
            if np.count_nonzero(rows[0]) >= 2:
                v_roots = roots_univariate(rows[0]).roots
                break
        for v in v_roots[np.abs(v_roots) > 1e-12]:
            z[v_axis] = v

            def F(x, z=z.copy()):
                z[u_axis], z[v_axis] = x
                return values(z)

            def J(x, z=z.copy()):
                z[u_axis], z[v_axis] = x
                return jacobian(z)

            result = newton_polish(F, J, np.array([u, v]))
            if result.residual > CURVE_RESIDUAL or np.linalg.cond(J(result.x)) > CURVE_COND:
                continue
            point = z.copy()
            point[u_axis], point[v_axis] = result.x
            if any(np.allclose(point, p, rtol=1e-9, atol=1e-12) for p in accepted):
                continue
            accepted.append(point)
    return [np.log(np.abs(p)) for p in accepted], False


def sample_curve_3d(
    P1: LaurentPolynomial, P2: LaurentPolynomial, fiber_grid: FiberGrid, param_axis: int = 2, threads: int = 1
) -> PointCloud:
    """Sample the amoeba of {P1 = P2 = 0} in (C*)^3 over a grid of the parameter coordinate."""
    if P1.n != 3 or P2.n != 3:
        raise UsageError("curve sampling needs two polynomials in 3 variables")
    u_axis, v_axis = [a for a in range(3) if a != param_axis]
    lo, hi = fiber_grid.window[param_axis]
    moduli = FiberGrid(((lo, hi),), fiber_grid.step, fiber_grid.args).moduli(0)
    args = 2 * np.pi * np.arange(fiber_grid.args) / fiber_grid.args
    samples = (np.exp(moduli)[:, None] * np.exp(1j * args)[None, :]).ravel()

    results = parallel_map(lambda zp: _curve_fiber(P1, P2, u_axis, v_axis, param_axis, zp), samples, threads)
    degenerate = sum(flag for _, flag in results)
    if degenerate == len(samples):
        raise DegenerateInputError("system is degenerate on every parameter fiber")
    points = [p for found, _ in results for p in found]
    points = np.array(points) if points else np.zeros((0, 3))
    meta = {
        "polynomials": [str(P1), str(P2)],
        "param_axis": param_axis,
        "fiber_grid": fiber_grid.to_dict(),
        "fibers": len(samples),
        "degenerate_fibers": degenerate,
    }
    logger.info("sampled %d curve points over z%d (%d degenerate fibers)", len(points), param_axis + 1, degenerate)
    return _flag_outside(PointCloud(3, points, meta), fiber_grid.window)


def sample_curve_amoeba(P1: LaurentPolynomial, P2: LaurentPolynomial, fiber_grid: FiberGrid, threads: int = 1) -> PointCloud:
    """Union of curve samples with each of the three coordinates as parameter."""
    clouds = []
    for axis in range(3):
        try:
            clouds.append(sample_curve_3d(P1, P2, fiber_grid, axis, threads))
        except DegenerateInputError:
            logger.info("parameter axis z%d is degenerate, skipped", axis + 1)
    if not clouds:
        raise DegenerateInputError("system is degenerate for every parameter axis")
    points = np.concatenate([c.points for c in clouds])
    return _flag_outside(PointCloud(3, points, {"parts": [c.meta for c in clouds]}), fiber_grid.window)


def rasterize(cloud: PointCloud, spec: GridSpec, dilation_r: float | None = None, strict: bool = True) -> GridRegion:
    """Occupy every cell whose center lies within ``dilation_r`` of a cloud point."""
    if cloud.n != spec.n:
        raise SpecMismatchError(f"cloud dimension {cloud.n} does not match grid dimension {spec.n}")
    floor = spec.h * math.sqrt(spec.n)
    if dilation_r is None:
        dilation_r = floor
    if strict and dilation_r < floor * (1 - 1e-12):
        raise PreconditionError(f"dilation radius {dilation_r} is below h*sqrt(n) = {floor}")

    occupancy = np.zeros(spec.shape, dtype=bool)
    if len(cloud) == 0:
        return GridRegion(spec, occupancy, dilation_r)
    inside = cloud.inside(spec.window)
    ignored = int((~inside).sum())
    if ignored:
        logger.info("%d cloud point(s) outside the window ignored", ignored)
    points = cloud.points[inside]
    if len(points):
        tree = cKDTree(points)
        dist, _ = tree.query(spec.centers(), distance_upper_bound=dilation_r * (1 + 1e-12))
        occupancy = np.isfinite(dist).reshape(spec.shape)
    return GridRegion(spec, occupancy, dilation_r, ignored)


def membership_field(
    P: LaurentPolynomial,
    spec: GridSpec,
    nodes: int | None = None,
    kappa: float = 2.0,
    threads: int = 1,
    seed: int | None = None,
) -> MembershipField:
    """Fiber minimum of |P| at every cell center, with threshold τ = κ·h·L.

    With a ``seed`` each cell also descends from random angles drawn from its own
    stream (keyed by cell index), so the field does not depend on ``threads``.
    """
    if spec.n != P.n:
        raise SpecMismatchError("grid dimension does not match polynomial")
    coarse = QuadratureSpec(nodes or (32 if P.n <= 2 else 16), P.n)
    centers = spec.centers()

    def cell(index):
        rng = task_rng(seed, index) if seed is not None else None
        return fiber_minimize(P, centers[index], coarse, rng=rng).min_modulus

    values = np.array(parallel_map(cell, range(len(centers)), threads))
    values = values.reshape(spec.shape)
    slopes = [np.abs(np.diff(values, axis=a)).max() / spec.h for a in range(spec.n)]
    lipschitz = max(slopes)
    tau = max(kappa * spec.h * lipschitz, 1e-12)
    return MembershipField(spec, values, tau)


def membership_consistency(field: MembershipField, region: GridRegion, zero_tol: float = 1e-10) -> MembershipCheck:
    """Occupied cells must sit below τ; zero-valued cells must lie within 2·dilation_r of the raster."""
    field.spec.require_same(region.spec)
    occupied = region.occupancy
    above = int((occupied & (field.values > field.tau)).sum())
    zeros = field.values <= zero_tol
    if occupied.any():
        distance = ndimage.distance_transform_edt(~occupied, sampling=field.spec.h)
        stray = int((zeros & (distance > 2 * region.dilation_r)).sum())
    else:
        stray = int(zeros.sum())
    return MembershipCheck(occupied_above_tau=above, stray_zero_cells=stray)


def complement_components(region: GridRegion) -> list[Component]:
    """Face-connected components of the unoccupied cells, in label order."""
    free = ~region.occupancy
    structure = ndimage.generate_binary_structure(region.spec.n, 1)
    labels, count = ndimage.label(free, structure=structure)
    components = []
    for label in range(1, count + 1):
        cells = np.argwhere(labels == label)
        on_edge = np.any((cells == 0) | (cells == np.array(region.spec.shape) - 1))
        components.append(Component(label, cells, bool(on_edge)))
    return components


def convexity_check_region(component: Component, region: GridRegion) -> list[Violation]:
    """Occupied cells inside the convex hull of a component, each with a witnessing pair.

    The pair (p, q) is the component pair whose midpoint is nearest the blocker,
    found by reflecting every component center through it.
    """
    if component.size == 0:
        raise UsageError("empty component")
    spec = region.spec
    centers = component.centers(spec)
    occupied = region.occupied_centers()
    if len(occupied) == 0 or component.size <= spec.n:
        return []
    if spec.n == 1:
        lo, hi = centers[:, 0].min(), centers[:, 0].max()
        inner = occupied[(occupied[:, 0] > lo) & (occupied[:, 0] < hi)]
        return [Violation((float(lo),), (float(hi),), (float(b[0]),)) for b in inner]
    try:
        hull = Delaunay(centers)
    except QhullError:
        # face-connected cells with collinear centers form a straight run
        return []
    blockers = occupied[hull.find_simplex(occupied) >= 0]
    if len(blockers) == 0:
        return []
    tree = cKDTree(centers)
    violations = []
    for b in blockers:
        dist, idx = tree.query(2 * b - centers)
        best = int(np.argmin(dist))
        violations.append(
            Violation(tuple(centers[best].tolist()), tuple(centers[idx[best]].tolist()), tuple(b.tolist()))
        )
    return violations
