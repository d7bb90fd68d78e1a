"""Bohr means of almost periodic functions and zeros of one-variable exponential sums."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .amoeba_geom import GridRegion, GridSpec, PointCloud, rasterize
from .errors import (
    BoundaryZeroError,
    DepthExceededError,
    MultiplicityError,
    NonFiniteSampleError,
    PreconditionError,
    UsageError,
    ZeroPolynomialError,
)
from .num_kernels import Box, QuadratureSpec, argument_count, boundary_clearance, newton_polish
from .poly_core import ExponentialSum, LaurentPolynomial, pullback_exponential
from .ronkin import ronkin_value, second_difference_mass
from .utils import parallel_map

logger = logging.getLogger(__name__)

EVAL_CHUNK = 1 << 18
MAX_GRID_POINTS = 1 << 22
MULTIPLICITY_CAP = 3
CLUSTER_SIZE = 1e-7
SPLITS = (0.5, 0.5137, 0.4781, 0.5419)


@dataclass(frozen=True)
class LadderSpec:
    s_values: tuple
    samples_per_unit: int = 16

    def __post_init__(self):
        s = tuple(float(v) for v in self.s_values)
        object.__setattr__(self, "s_values", s)
        if len(s) < 3:
            raise UsageError("ladder needs at least 3 points")
        if any(v <= 0 for v in s) or any(b <= a for a, b in zip(s, s[1:])):
            raise UsageError("ladder must be increasing and positive")
        if s[-1] / s[0] < 10:
            raise UsageError("ladder must span a factor of at least 10")
        if self.samples_per_unit < 1:
            raise UsageError("samples_per_unit must be positive")

    @property
    def s_max(self) -> float:
        return self.s_values[-1]


@dataclass(frozen=True)
class BohrMean:
    estimate: float
    table: tuple
    spread: float
    extrapolated: float


@dataclass(frozen=True)
class ZeroChainSample:
    box: Box
    zeros: tuple

    @property
    def count(self) -> int:
        return sum(m for _, m in self.zeros)

    def to_dict(self) -> dict:
        return {"box": self.box.to_list(), "zeros": [{"z": [z.real, z.imag], "m": m} for z, m in self.zeros]}


@dataclass(frozen=True)
class DensityEstimate:
    strip: tuple
    estimates: tuple
    counts: tuple
    extrapolated: float
    spread: float

    def to_dict(self) -> dict:
        return {
            "strip": list(self.strip),
            "ladder": [{"s": s, "count": c, "density": d} for (s, d), c in zip(self.estimates, self.counts)],
            "extrapolated": self.extrapolated,
            "spread": self.spread,
        }


@dataclass(frozen=True, eq=False)
class SlopeJump:
    y: np.ndarray
    mean: np.ndarray
    mass: np.ndarray

    @property
    def total(self) -> float:
        return float(self.mass.sum())

    def mass_in(self, lo: float, hi: float) -> float:
        return float(self.mass[(self.y > lo) & (self.y < hi)].sum())


def _extrapolate(table) -> float:
    """Fit a + b/s + c/s² through the top three ladder points and return a."""
    s = np.array([t[0] for t in table[-3:]])
    v = np.array([t[1] for t in table[-3:]])
    design = np.column_stack([np.ones(3), 1 / s, 1 / s**2])
    return float(np.linalg.solve(design, v)[0])


def _spread(table) -> float:
    top = [v for _, v in table[len(table) // 2 :]]
    return float(max(top) - min(top))


def _box_grid(s: float, n: int, per_unit: int, jitter: bool) -> list[np.ndarray]:
    count = int(math.ceil(2 * s * per_unit))
    if count**n > MAX_GRID_POINTS:
        count = int(MAX_GRID_POINTS ** (1.0 / n))
        logger.info("Bohr grid at s=%g reduced to %d points per axis", s, count)
    cell = 2 * s / count
    axis = -s + (np.arange(count) + (1.0 if jitter else 0.5)) * cell
    if jitter:
        axis = np.where(axis >= s, axis - cell, axis)
    return [axis] * n


def _box_average(f, axes: list[np.ndarray]) -> tuple[float, np.ndarray | None]:
    """Average of f over the product grid; also returns the first non-finite location."""
    n = len(axes)
    lead = axes[0]
    rest = np.zeros((1, 0))
    if n > 1:
        mesh = np.meshgrid(*axes[1:], indexing="ij")
        rest = np.column_stack([m.ravel() for m in mesh])
    per_slab = len(rest)
    slabs = max(1, EVAL_CHUNK // per_slab)
    partial = []
    for start in range(0, len(lead), slabs):
        first = lead[start : start + slabs]
        x = np.column_stack([np.repeat(first, per_slab), np.tile(rest, (len(first), 1))])
        values = np.asarray(f(x), dtype=np.float64)
        bad = ~np.isfinite(values)
        if bad.any():
            return math.nan, x[bad][0]
        partial.append(values.sum())
    return float(np.sum(partial)) / (len(lead) * per_slab), None


def bohr_mean(f, ladder: LadderSpec, n: int = 1, jitter: bool = False) -> BohrMean:
    """Averages of f over the boxes (−s, s)^n along the ladder.

    ``f`` maps an (k, n) array of real points to k real values. With ``jitter``
    a grid that hits a non-finite sample is moved by half a cell once.
    """
    table = []
    for s in ladder.s_values:
        value, bad = _box_average(f, _box_grid(s, n, ladder.samples_per_unit, False))
        if bad is not None and jitter:
            logger.debug("non-finite sample at %s, shifting the s=%g grid by half a cell", bad.tolist(), s)
            value, bad = _box_average(f, _box_grid(s, n, ladder.samples_per_unit, True))
        if bad is not None:
            raise NonFiniteSampleError("non-finite sample", bad.tolist())
        table.append((s, value))
    return BohrMean(estimate=table[-1][1], table=tuple(table), spread=_spread(table), extrapolated=_extrapolate(table))


def lattice_polynomial(f: ExponentialSum, y) -> tuple[LaurentPolynomial, float] | None:
    """For integer frequency offsets: Q and c with log|f(x+iy)| = c + log|Q(e^{ix})|."""
    lattice = f.integer_lattice()
    if lattice is None:
        return None
    base, offsets = lattice
    y = np.asarray(y, dtype=np.float64).reshape(f.n)
    coefs = f.coefficients * np.exp(-(offsets @ y))
    Q = LaurentPolynomial.from_terms(f.n, zip(offsets.tolist(), coefs))
    return Q, float(-(base @ y))


def mean_log_modulus(f: ExponentialSum, y, ladder: LadderSpec | None = None, quad: QuadratureSpec | None = None) -> float:
    """M_f(y), the Bohr mean of x ↦ log|f(x + iy)|.

    Periodic sums are averaged exactly over one period torus; other sums use
    the ladder and report the extrapolated value.
    """
    y = np.asarray(y, dtype=np.float64).reshape(f.n)
    reduced = lattice_polynomial(f, y)
    if reduced is not None:
        Q, offset = reduced
        return offset + ronkin_value(Q, np.zeros(f.n), quad)
    if ladder is None:
        raise UsageError("non-periodic exponential sums need a ladder")
    return log_modulus_ladder(f, y, ladder).extrapolated


def log_modulus_ladder(f: ExponentialSum, y, ladder: LadderSpec) -> BohrMean:
    """The full ladder table of x ↦ log|f(x + iy)|."""
    y = np.asarray(y, dtype=np.float64).reshape(f.n)

    def g(x):
        with np.errstate(divide="ignore"):
            return np.log(np.abs(f(x + 1j * y)))

    return bohr_mean(g, ladder, f.n, jitter=True)


def _evaluators(f: ExponentialSum):
    if f.n != 1:
        raise UsageError("zero localization is for one-variable sums")
    try:
        df = f.derivative()
    except ZeroPolynomialError:
        return f, None
    return f, df


def _polish(g, dg, b: Box) -> complex | None:
    result = newton_polish(lambda x: np.atleast_1d(g(x[0])), lambda x: np.array([[dg(x[0])]]), np.array([b.center]))
    z = complex(result.x[0])
    return z if result.ok and b.expanded(1e-9).contains(z) else None


def _split(b: Box):
    wide = (b.x1 - b.x0) >= (b.y1 - b.y0)
    for t in SPLITS:
        if wide:
            cut = b.x0 + t * (b.x1 - b.x0)
            yield [Box(b.x0, cut, b.y0, b.y1), Box(cut, b.x1, b.y0, b.y1)]
        else:
            cut = b.y0 + t * (b.y1 - b.y0)
            yield [Box(b.x0, b.x1, b.y0, cut), Box(b.x0, b.x1, cut, b.y1)]


def _count_children(f, df, b: Box, count: int, tol: float):
    # boundary tolerance shrinks with the box so clusters stay separable
    tol = min(tol, 1e-3 * max(b.x1 - b.x0, b.y1 - b.y0))
    for children in _split(b):
        try:
            counts = [argument_count(f, df, c, tol, jitter=False).count for c in children]
        except BoundaryZeroError:
            continue
        if sum(counts) == count:
            return list(zip(children, counts))
    return None


def zeros_in_box(f: ExponentialSum, box: Box, tol: float = 1e-6, max_depth: int = 60, jitter: bool = True) -> ZeroChainSample:
    """Locate the zeros of f in ``box`` with multiplicities by guided bisection."""
    f, df = _evaluators(f)
    if df is None:
        return ZeroChainSample(box, ())
    top = argument_count(f, df, box, tol, jitter=jitter)
    box = top.box
    derivatives = [f, df]
    queue = [(box, top.count, 0)]
    zeros, unresolved = [], []
    while queue:
        b, count, depth = queue.pop(0)
        if count == 0:
            continue
        if count == 1:
            z = _polish(f, df, b)
            if z is not None:
                zeros.append((z, 1))
                continue
        diameter = max(b.x1 - b.x0, b.y1 - b.y0)
        if diameter < CLUSTER_SIZE:
            if count > MULTIPLICITY_CAP:
                raise MultiplicityError(f"{count} zeros clustered in {b.to_list()}")
            while len(derivatives) <= count:
                derivatives.append(derivatives[-1].derivative())
            z = _polish(derivatives[count - 1], derivatives[count], b.expanded(diameter))
            zeros.append((z if z is not None else b.center, count))
            continue
        if depth >= max_depth:
            unresolved.append(b)
            continue
        children = _count_children(f, df, b, count, tol)
        if children is None:
            unresolved.append(b)
            continue
        queue.extend((c, k, depth + 1) for c, k in children)
    if unresolved:
        raise DepthExceededError("bisection did not separate the zeros", [u.to_list() for u in unresolved])
    zeros.sort(key=lambda item: (item[0].real, item[0].imag))
    return ZeroChainSample(box, tuple(zeros))


def _mean_and_noise(f: ExponentialSum, y: float, ladder, quad) -> tuple[float, float]:
    """M_f(y) with its ladder spread; periodic sums are exact, so their noise is zero."""
    if f.integer_lattice() is not None:
        return mean_log_modulus(f, [y], ladder, quad), 0.0
    if ladder is None:
        raise UsageError("non-periodic exponential sums need a ladder")
    result = log_modulus_ladder(f, [y], ladder)
    return result.extrapolated, result.spread


def _check_strip_margin(f: ExponentialSum, strip, ladder, margin: float, quad) -> None:
    for edge in strip:
        m, noise = zip(*(_mean_and_noise(f, edge + d, ladder, quad) for d in (-margin, 0.0, margin)))
        # weights 1, -2, 1 bound the noise of the second difference by 4·max spread
        tolerance = 1e-6 * (1 + abs(m[1])) + 1e-8 + 4 * max(noise)
        if abs(m[0] - 2 * m[1] + m[2]) > tolerance:
            raise PreconditionError(f"strip edge y={edge} is within {margin} of the amoeba")


def _clear_edges(f, df, edges: np.ndarray, y0: float, y1: float, tol: float) -> np.ndarray:
    """Move vertical tile edges that pass too close to a zero."""
    edges = edges.copy()
    width = edges[1] - edges[0]
    for k, x in enumerate(edges):
        for attempt in range(12):
            if boundary_clearance(f, df, complex(x, y0), complex(x, y1), 257) >= tol:
                break
            x = edges[k] + (attempt + 1) * 0.01 * width
        else:
            raise BoundaryZeroError(f"cannot place a tile edge near x={edges[k]}")
        edges[k] = x
    return edges


def zero_density(
    f: ExponentialSum,
    strip,
    ladder: LadderSpec,
    *,
    margin: float = 0.1,
    tile_width: float = 4.0,
    tol: float = 1e-6,
    quad: QuadratureSpec | None = None,
    threads: int = 1,
) -> DensityEstimate:
    """Zero count per unit length in (−s, s) + iG along the ladder."""
    y0, y1 = (float(v) for v in strip)
    if not y0 < y1:
        raise UsageError("strip needs lo < hi")
    _check_strip_margin(f, (y0, y1), ladder, margin, quad)
    f, df = _evaluators(f)
    s_max = ladder.s_max
    if df is None:
        counts = tuple(0 for _ in ladder.s_values)
    else:
        tiles = int(math.ceil(2 * s_max / tile_width))
        edges = _clear_edges(f, df, -s_max + tile_width * np.arange(tiles + 1), y0, y1, tol)
        boxes = [Box(a, b, y0, y1) for a, b in zip(edges[:-1], edges[1:])]
        samples = parallel_map(lambda b: zeros_in_box(f, b, tol, jitter=False), boxes, threads)
        located = [(z, m) for sample in samples for z, m in sample.zeros]
        counts = tuple(sum(m for z, m in located if abs(z.real) < s) for s in ladder.s_values)
        logger.info("located %d zeros in strip (%g, %g)", len(located), y0, y1)
    table = [(s, c / (2 * s)) for s, c in zip(ladder.s_values, counts)]
    return DensityEstimate(
        strip=(y0, y1),
        estimates=tuple(table),
        counts=counts,
        extrapolated=_extrapolate(table),
        spread=_spread(table),
    )


def slope_jump_measure(f: ExponentialSum, y_grid, ladder: LadderSpec | None = None, quad: QuadratureSpec | None = None) -> SlopeJump:
    """Second differences of M_f over a uniform y grid, per unit real length (shared normalization / 2π)."""
    y = np.asarray(y_grid, dtype=np.float64).reshape(-1)
    if len(y) < 3:
        raise PreconditionError("slope jump needs at least 3 grid points")
    steps = np.diff(y)
    if not np.allclose(steps, steps[0], rtol=1e-9):
        raise UsageError("y grid must be uniform")
    mean = np.array([mean_log_modulus(f, [v], ladder, quad) for v in y])
    mass = second_difference_mass(mean, float(steps[0])) / (2 * np.pi)
    return SlopeJump(y=y, mean=mean, mass=mass)


def pullback_consistency(P: LaurentPolynomial, y_list, quad: QuadratureSpec | None = None, ladder: LadderSpec | None = None) -> float:
    """max |M_{E*P}(y) − N_P(y)| over ``y_list``, the two sides at different node counts."""
    quad = quad or QuadratureSpec(2048, P.n)
    other = QuadratureSpec(2 * quad.nodes_per_axis, P.n)
    f = pullback_exponential(P)
    deviation = 0.0
    for y in y_list:
        y = np.atleast_1d(np.asarray(y, dtype=np.float64))
        lhs = mean_log_modulus(f, y, ladder, other)
        rhs = ronkin_value(P, y, quad)
        deviation = max(deviation, abs(lhs - rhs))
    return deviation


def zero_amoeba(zeros: ZeroChainSample | list, spec: GridSpec) -> GridRegion:
    """Imaginary parts of located zeros, dilated by h, as a one-dimensional raster."""
    if spec.n != 1:
        raise UsageError("zero amoeba raster is one-dimensional")
    pairs = zeros.zeros if isinstance(zeros, ZeroChainSample) else zeros
    points = np.array([[z.imag] for z, _ in pairs]).reshape(-1, 1)
    return rasterize(PointCloud(1, points, {"zeros": len(points)}), spec, spec.h)
