"""Numeric primitives shared by the geometry modules.

Coefficient lists are in ascending order of powers throughout
(``coeffs[k]`` multiplies ``z**k``), as in :mod:`numpy.polynomial.polynomial`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import least_squares

from .errors import (
    BoundaryZeroError,
    ConditioningError,
    DegenerateFiberError,
    PrecisionError,
    PreconditionError,
    SingularNodeError,
    UsageError,
)
from .poly_core import ZERO_TOL, LaurentPolynomial, eval_fiber

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
LEAD_RTOL = 1e-14
CHUNK_ROWS = 1 << 18


@dataclass(frozen=True)
class QuadratureSpec:
    nodes_per_axis: int
    axes: int

    def __post_init__(self):
        if self.nodes_per_axis < 2:
            raise UsageError(f"quadrature needs at least 2 nodes per axis, got {self.nodes_per_axis}")
        if self.axes < 0:
            raise UsageError("negative axis count")

    @property
    def step(self) -> float:
        return TWO_PI / self.nodes_per_axis

    def node_chunks(self):
        """Yield blocks of nodes θ_k = 2πk/N in C (lexicographic) order."""
        N, m = self.nodes_per_axis, self.axes
        if m == 0:
            yield np.zeros((1, 0))
            return
        grid = np.arange(N) * self.step
        rest = np.zeros((1, 0))
        if m > 1:
            mesh = np.meshgrid(*([grid] * (m - 1)), indexing="ij")
            rest = np.column_stack([a.ravel() for a in mesh])
        per_slab = rest.shape[0]
        slabs = max(1, CHUNK_ROWS // per_slab)
        for start in range(0, N, slabs):
            first = grid[start : start + slabs]
            yield np.column_stack([np.repeat(first, per_slab), np.tile(rest, (len(first), 1))])


def periodic_mean(g: Callable[[np.ndarray], np.ndarray], spec: QuadratureSpec) -> float:
    """Uniform-rule torus average N^{-m} Σ g(θ_k).

    ``g`` maps an (k, m) array of angles to k real values. A non-finite node is
    moved by half a cell diagonal once; if it stays non-finite the node is singular.
    """
    partial = []
    count = 0
    for theta in spec.node_chunks():
        values = np.asarray(g(theta), dtype=np.float64)
        bad = ~np.isfinite(values)
        if bad.any():
            logger.debug("perturbing %d non-finite quadrature node(s)", int(bad.sum()))
            values[bad] = g(theta[bad] + 0.5 * spec.step)
            still = ~np.isfinite(values)
            if still.any():
                raise SingularNodeError(f"integrand non-finite at node {theta[still][0].tolist()} after perturbation")
        partial.append(values.sum())
        count += values.size
    return float(np.sum(partial)) / count


@dataclass(frozen=True)
class MeanEstimate:
    value: float
    nodes: int
    err_est: float
    capped: bool


def adaptive_periodic_mean(g, axes: int, start: int, cap: int, target: float, adaptive: bool = True) -> MeanEstimate:
    """Double N until |mean_N − mean_{N/2}| ≤ target or N reaches the cap."""
    N = max(2, int(start))
    previous = periodic_mean(g, QuadratureSpec(max(2, N // 2), axes))
    current = periodic_mean(g, QuadratureSpec(N, axes))
    while adaptive and abs(current - previous) > target and N < cap:
        N *= 2
        previous, current = current, periodic_mean(g, QuadratureSpec(N, axes))
    err = abs(current - previous)
    return MeanEstimate(value=current, nodes=N, err_est=err, capped=err > target)


@dataclass(frozen=True)
class RootSet:
    roots: np.ndarray
    residuals: np.ndarray
    degree_deficit: int

    @property
    def degree(self) -> int:
        return len(self.roots)


def _horner(coeffs: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """p(x) and p'(x) for rows of ascending coefficients; x has shape (B, r)."""
    d = coeffs.shape[1] - 1
    p = np.broadcast_to(coeffs[:, d : d + 1], x.shape).astype(np.complex128)
    dp = np.zeros_like(p)
    for k in range(d - 1, -1, -1):
        dp = dp * x + p
        p = p * x + coeffs[:, k : k + 1]
    return p, dp


def _initial_guesses(coeffs: np.ndarray) -> np.ndarray:
    d = coeffs.shape[1] - 1
    lead = np.abs(coeffs[:, -1])
    const = np.abs(coeffs[:, 0])
    ratios = np.abs(coeffs[:, :-1]) / lead[:, None]
    bound = np.max(ratios ** (1.0 / (d - np.arange(d))), axis=1)
    radius = np.where(const > 0, (const / lead) ** (1.0 / d), 0.5 * bound)
    radius = np.where(radius > 0, radius, 1.0)
    angles = TWO_PI * np.arange(d) / d + 0.4
    return radius[:, None] * np.exp(1j * angles)[None, :]


def aberth_batch(coeffs: np.ndarray, max_iter: int = 500, polish: int = 3) -> np.ndarray:
    """Simultaneous Aberth–Ehrlich iteration for a batch of equal-degree polynomials.

    Rows must have a nonzero leading coefficient. Returns (B, d) roots.
    """
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=np.complex128))
    d = coeffs.shape[1] - 1
    if d == 1:
        return -(coeffs[:, :1] / coeffs[:, 1:2])
    x = _initial_guesses(coeffs)
    eye = np.eye(d, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for _ in range(max_iter):
            p, dp = _horner(coeffs, x)
            ratio = p / dp
            diff = x[:, :, None] - x[:, None, :]
            diff[:, eye] = np.inf
            s = np.sum(1.0 / diff, axis=2)
            step = ratio / (1.0 - ratio * s)
            step[~np.isfinite(step)] = 0.0
            x = x - step
            if np.all(np.abs(step) <= 4e-16 * (1.0 + np.abs(x))):
                break
        for _ in range(polish):
            p, dp = _horner(coeffs, x)
            step = p / dp
            step[~np.isfinite(step)] = 0.0
            x = x - step
    return x


def roots_univariate(coeffs) -> RootSet:
    """All roots of Σ coeffs[k] z^k after stripping negligible leading coefficients."""
    c = np.asarray(coeffs, dtype=np.complex128).ravel()
    scale = np.max(np.abs(c), initial=0.0)
    if scale <= ZERO_TOL:
        raise PreconditionError("polynomial has no coefficient above 1e-300")
    significant = np.flatnonzero(np.abs(c) > LEAD_RTOL * scale)
    top = int(significant[-1])
    deficit = len(c) - 1 - top
    c = c[: top + 1]
    if top == 0:
        return RootSet(np.zeros(0, dtype=np.complex128), np.zeros(0), deficit)
    low = int(np.flatnonzero(c)[0])
    roots = np.zeros(low, dtype=np.complex128)
    if top > low:
        roots = np.concatenate([roots, aberth_batch(c[None, low:])[0]])
    residuals = np.abs(np.polynomial.polynomial.polyval(roots, c))
    return RootSet(roots=roots, residuals=residuals, degree_deficit=deficit)


def _sylvester(f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Batched Sylvester matrices from ascending coefficient rows (B, p+1) and (B, q+1)."""
    p, q = f.shape[1] - 1, g.shape[1] - 1
    size = p + q
    out = np.zeros((f.shape[0], size, size), dtype=np.complex128)
    f_desc, g_desc = f[:, ::-1], g[:, ::-1]
    for r in range(q):
        out[:, r, r : r + p + 1] = f_desc
    for r in range(p):
        out[:, q + r, r : r + q + 1] = g_desc
    return out


def _bivariate(P: LaurentPolynomial, u_axis: int, v_axis: int, fixed) -> np.ndarray:
    """Coefficient table C[a, b] of u^a v^b after substituting the fixed axes (shifted to start at 0)."""
    others = [i for i in range(P.n) if i not in (u_axis, v_axis)]
    fixed = np.asarray(fixed, dtype=np.complex128)
    if np.any(fixed[others] == 0):
        raise PreconditionError("fixed values must be nonzero")
    scale = np.exp(P.exponents[:, others] @ np.log(fixed[others])) if others else np.ones(len(P.terms))
    a = P.exponents[:, u_axis] - P.exponents[:, u_axis].min()
    b = P.exponents[:, v_axis] - P.exponents[:, v_axis].min()
    table = np.zeros((a.max() + 1, b.max() + 1), dtype=np.complex128)
    np.add.at(table, (a, b), P.coefficients * scale)
    table[np.abs(table) <= 1e-14 * np.abs(P.coefficients * scale).max()] = 0.0
    rows = np.flatnonzero(table.any(axis=1))
    cols = np.flatnonzero(table.any(axis=0))
    if rows.size == 0:
        raise DegenerateFiberError("polynomial vanishes on this fiber")
    return table[: rows[-1] + 1, cols[0] : cols[-1] + 1]


def _resultant_at(t1: np.ndarray, t2: np.ndarray, u: np.ndarray) -> np.ndarray:
    powers = u[:, None] ** np.arange(max(t1.shape[0], t2.shape[0]))[None, :]
    f = powers[:, : t1.shape[0]] @ t1
    g = powers[:, : t2.shape[0]] @ t2
    return np.linalg.det(_sylvester(f, g))


def eliminate(P1: LaurentPolynomial, P2: LaurentPolynomial, u_axis: int, v_axis: int, fixed, radius: float = 1.0) -> np.ndarray:
    """Res_v(P1, P2) as ascending coefficients in u, by evaluation at roots of unity and FFT interpolation.

    Sign convention: determinant of the Sylvester matrix with the rows of P1
    first and coefficients in descending powers of v. Laurent shifts in u and v
    only change the result by a monomial factor.
    """
    if P1.n != P2.n:
        raise UsageError("dimension mismatch")
    t1 = _bivariate(P1, u_axis, v_axis, fixed)
    t2 = _bivariate(P2, u_axis, v_axis, fixed)
    (du1, dv1), (du2, dv2) = (t1.shape[0] - 1, t1.shape[1] - 1), (t2.shape[0] - 1, t2.shape[1] - 1)
    if dv1 == 0 and dv2 == 0:
        raise DegenerateFiberError("neither polynomial depends on the eliminated variable")
    degree = dv1 * du2 + dv2 * du1
    nodes = degree + 1
    u = radius * np.exp(1j * TWO_PI * np.arange(nodes) / nodes)
    values = _resultant_at(t1, t2, u)
    coeffs = np.fft.fft(values) / nodes / radius ** np.arange(nodes)

    off_grid = np.array([radius * 1.1 * np.exp(1j * np.pi / nodes)])
    direct = _resultant_at(t1, t2, off_grid)[0]
    interpolated = np.polynomial.polynomial.polyval(off_grid[0], coeffs)
    if abs(direct - interpolated) > 1e-6 * max(1.0, abs(direct)):
        raise ConditioningError("resultant interpolation does not reproduce an off-grid value", nodes)
    scale = np.max(np.abs(coeffs), initial=0.0)
    keep = np.flatnonzero(np.abs(coeffs) > 1e-13 * scale)
    if keep.size == 0:
        raise DegenerateFiberError("resultant vanishes identically (common factor)")
    coeffs = coeffs[: keep[-1] + 1].copy()
    coeffs[np.abs(coeffs) <= 1e-13 * scale] = 0.0
    return coeffs


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle x0 < Re z < x1, y0 < Im z < y1."""

    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise UsageError(f"degenerate box {self}")

    def expanded(self, by: float) -> "Box":
        return Box(self.x0 - by, self.x1 + by, self.y0 - by, self.y1 + by)

    def contains(self, z: complex) -> bool:
        return self.x0 < z.real < self.x1 and self.y0 < z.imag < self.y1

    @property
    def center(self) -> complex:
        return complex(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))

    def edges(self):
        """Counterclockwise edges as (start, end) complex pairs."""
        a, b = complex(self.x0, self.y0), complex(self.x1, self.y0)
        c, d = complex(self.x1, self.y1), complex(self.x0, self.y1)
        return ((a, b), (b, c), (c, d), (d, a))

    def to_list(self) -> list[float]:
        return [self.x0, self.x1, self.y0, self.y1]


@dataclass(frozen=True)
class WindingCount:
    count: int
    residual: float
    box: Box


def boundary_clearance(f, df, start: complex, end: complex, samples: int) -> float:
    """Smallest |f|/|f'| along a segment: a first-order distance-to-zero estimate."""
    z = start + (end - start) * np.linspace(0.0, 1.0, samples)
    fz, dfz = np.abs(f(z)), np.abs(df(z))
    with np.errstate(divide="ignore", invalid="ignore"):
        dist = np.where(dfz > 0, fz / dfz, np.inf)
    dist[fz == 0] = 0.0
    return float(np.min(dist))


def _edge_integral(f, df, start: complex, end: complex, max_points: int) -> complex:
    length = abs(end - start)
    m = int(64 * max(1, np.ceil(length)))
    previous = None
    while True:
        t = np.linspace(0.0, 1.0, m + 1)
        z = start + (end - start) * t
        values = df(z) / f(z) * (end - start)
        current = np.trapz(values, t)
        if previous is not None and abs(current - previous) <= 1e-6:
            return current
        if m >= max_points:
            return current
        previous = current
        m *= 2


def argument_count(f, df, box: Box, tol: float = 1e-6, max_points: int = 1 << 16, jitter: bool = True) -> WindingCount:
    """Number of zeros of f inside ``box`` via the argument principle."""
    for attempt in (0, 1):
        suspicious = any(boundary_clearance(f, df, s, e, 257 + int(64 * abs(e - s))) < tol for s, e in box.edges())
        if not suspicious:
            break
        if attempt == 0 and jitter:
            logger.info("zero suspected near boundary of %s, jittering by %g", box, tol)
            box = box.expanded(tol)
            continue
        raise BoundaryZeroError(f"zero within {tol} of the boundary of {box.to_list()}")
    total = sum(_edge_integral(f, df, s, e, max_points) for s, e in box.edges())
    winding = total / (2j * np.pi)
    count = int(np.rint(winding.real))
    residual = float(abs(winding - count))
    if residual >= 0.1:
        raise PrecisionError(f"winding number {winding:.4f} is not close to an integer")
    return WindingCount(count=count, residual=residual, box=box)


@dataclass(frozen=True)
class NewtonResult:
    x: np.ndarray
    ok: bool
    residual: float
    iterations: int
    reason: str = ""


def newton_polish(F, J, x0, max_iter: int = 50, tol: float = 1e-12) -> NewtonResult:
    """Damped Newton iteration for a square system F(x) = 0 with Jacobian J."""
    x = np.atleast_1d(np.asarray(x0, dtype=np.complex128)).copy()
    fx = np.atleast_1d(F(x))
    norm = float(np.max(np.abs(fx)))
    for it in range(max_iter + 1):
        if norm <= tol:
            return NewtonResult(x, True, norm, it)
        if it == max_iter:
            break
        jac = np.atleast_2d(J(x))
        try:
            if np.linalg.cond(jac) > 1e15:
                raise np.linalg.LinAlgError
            step = np.linalg.solve(jac, -fx)
        except np.linalg.LinAlgError:
            return NewtonResult(x, False, norm, it, "singular")
        damping = 1.0
        for _ in range(30):
            trial = x + damping * step
            f_trial = np.atleast_1d(F(trial))
            trial_norm = float(np.max(np.abs(f_trial)))
            if trial_norm < norm or not np.isfinite(norm):
                break
            damping *= 0.5
        else:
            return NewtonResult(x, False, norm, it, "stalled")
        x, fx, norm = trial, f_trial, trial_norm
    return NewtonResult(x, False, norm, max_iter, "max_iter")


@dataclass(frozen=True)
class FiberMinimum:
    min_modulus: float
    theta: np.ndarray


def fiber_minimize(
    P: LaurentPolynomial, y, coarse: QuadratureSpec, descent_steps: int = 50, starts: int = 3, rng: np.random.Generator | None = None
) -> FiberMinimum:
    """Upper bound for min over θ of |P(e^{y+iθ})|: grid scan, then local descent from the best cells.

    With ``rng`` the descent also runs from ``starts`` uniformly drawn angles.
    """
    y = np.asarray(y, dtype=np.float64)
    if coarse.axes != P.n:
        raise UsageError("coarse grid must cover all n torus axes")
    chunks = list(coarse.node_chunks())
    values = np.concatenate([np.abs(eval_fiber(P, y, th)) for th in chunks])
    nodes = np.concatenate(chunks)
    order = np.argsort(values, kind="stable")[:starts]
    best_value = float(values[order[0]])
    best_theta = nodes[order[0]].copy()

    exps = P.exponents.astype(np.float64)
    weights = P.coefficients * np.exp(exps @ y)

    def residual(theta):
        p = np.exp(1j * (exps @ theta)) @ weights
        return np.array([p.real, p.imag])

    def jacobian(theta):
        dp = (1j * np.exp(1j * (exps @ theta)) * weights) @ exps
        return np.vstack([dp.real, dp.imag])

    if np.any(P.exponents != P.exponents[0]) and best_value > 0.0:
        initial = [nodes[idx] for idx in order]
        if rng is not None:
            initial.extend(rng.uniform(0.0, TWO_PI, size=(starts, P.n)))
        for theta0 in initial:
            fit = least_squares(
                residual, theta0, jac=jacobian, method="trf",
                max_nfev=descent_steps, ftol=1e-15, xtol=1e-15, gtol=1e-15,
            )
            value = float(np.hypot(*residual(fit.x)))
            if value < best_value:
                best_value, best_theta = value, np.mod(fit.x, TWO_PI)
    return FiberMinimum(min_modulus=best_value, theta=best_theta)
