"""Laurent polynomials, exponential sums and Newton polytopes.

Values are immutable after construction. Terms are canonicalized on the way in
(sorted lexicographically by exponent, duplicates merged, vanishing
coefficients dropped), so equal polynomials compare and hash equal.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, QhullError

from .errors import DegenerateFiberError, DomainError, PreconditionError, UsageError, ZeroPolynomialError

logger = logging.getLogger(__name__)

ZERO_TOL = 1e-300
# coefficient sums below this fraction of their contributions count as cancelled
CANCEL_RTOL = 1e-14


def _canonical_terms(n: int, terms, cast) -> tuple:
    if n < 1:
        raise UsageError(f"dimension must be positive, got {n}")
    merged: dict[tuple, complex] = {}
    for position, (key, coef) in enumerate(terms):
        key = tuple(cast(v) for v in np.atleast_1d(key))
        if len(key) != n:
            raise UsageError(f"term {position}: expected {n} entries, got {len(key)}")
        merged[key] = merged.get(key, 0j) + complex(coef)
    kept = [(k, c) for k, c in sorted(merged.items(), key=lambda item: item[0]) if abs(c) > ZERO_TOL]
    if not kept:
        raise ZeroPolynomialError("every coefficient vanishes")
    return tuple(kept)


def _check_terms(n: int, terms: tuple) -> None:
    if not terms:
        raise ZeroPolynomialError("empty term list")
    keys = [k for k, _ in terms]
    if len(set(keys)) != len(keys):
        raise UsageError("exponent vectors must be pairwise distinct")
    for k, c in terms:
        if len(k) != n:
            raise UsageError(f"exponent {k} does not have {n} entries")
        if abs(c) <= ZERO_TOL:
            raise UsageError(f"coefficient of {k} vanishes")


@dataclass(frozen=True)
class LaurentPolynomial:
    n: int
    terms: tuple

    def __post_init__(self):
        _check_terms(self.n, self.terms)

    @classmethod
    def from_terms(cls, n: int, terms) -> "LaurentPolynomial":
        return cls(n, _canonical_terms(n, terms, int))

    @classmethod
    def monomial(cls, exponent, coef: complex = 1.0) -> "LaurentPolynomial":
        exponent = tuple(int(e) for e in exponent)
        return cls.from_terms(len(exponent), [(exponent, coef)])

    @cached_property
    def exponents(self) -> np.ndarray:
        return np.array([k for k, _ in self.terms], dtype=np.int64).reshape(len(self.terms), self.n)

    @cached_property
    def coefficients(self) -> np.ndarray:
        return np.array([c for _, c in self.terms], dtype=np.complex128)

    def depends_on(self, j: int) -> bool:
        column = self.exponents[:, j]
        return bool(column.min() != column.max())

    def degree_span(self, j: int) -> int:
        column = self.exponents[:, j]
        return int(column.max() - column.min())

    def __call__(self, z):
        return evaluate(self, z)

    def __mul__(self, other):
        if isinstance(other, LaurentPolynomial):
            if other.n != self.n:
                raise UsageError("dimension mismatch in product")
            exps = (self.exponents[:, None, :] + other.exponents[None, :, :]).reshape(-1, self.n)
            coefs = (self.coefficients[:, None] * other.coefficients[None, :]).ravel()
            return LaurentPolynomial.from_terms(self.n, zip(exps.tolist(), coefs))
        if np.isscalar(other):
            return LaurentPolynomial.from_terms(self.n, [(k, c * other) for k, c in self.terms])
        return NotImplemented

    __rmul__ = __mul__

    def rescaled(self, a) -> "LaurentPolynomial":
        """Q(z) = P(a·z) for a in (C*)^n."""
        a = np.asarray(a, dtype=np.complex128)
        if a.shape != (self.n,) or np.any(a == 0):
            raise DomainError("rescaling needs n nonzero factors")
        scale = np.exp(self.exponents @ np.log(a))
        return LaurentPolynomial.from_terms(self.n, zip(self.exponents.tolist(), self.coefficients * scale))

    def __str__(self):
        parts = []
        for k, c in self.terms:
            mono = "*".join(f"z{i + 1}^{e}" for i, e in enumerate(k) if e) or "1"
            parts.append(f"({c.real:g}{c.imag:+g}j)*{mono}")
        return " + ".join(parts)


@dataclass(frozen=True)
class ExponentialSum:
    """f(z) = Σ c_j exp(i⟨λ_j, z⟩) on C^n."""

    n: int
    terms: tuple

    def __post_init__(self):
        _check_terms(self.n, self.terms)

    @classmethod
    def from_terms(cls, n: int, terms) -> "ExponentialSum":
        return cls(n, _canonical_terms(n, terms, float))

    @cached_property
    def frequencies(self) -> np.ndarray:
        return np.array([k for k, _ in self.terms], dtype=np.float64).reshape(len(self.terms), self.n)

    @cached_property
    def coefficients(self) -> np.ndarray:
        return np.array([c for _, c in self.terms], dtype=np.complex128)

    def __call__(self, z):
        z = np.asarray(z, dtype=np.complex128)
        if self.n == 1 and (z.ndim == 0 or z.shape[-1] != 1):
            return np.exp(1j * z[..., None] * self.frequencies[:, 0]) @ self.coefficients
        return np.exp(1j * (z @ self.frequencies.T)) @ self.coefficients

    def derivative(self) -> "ExponentialSum":
        """d/dz for n = 1."""
        if self.n != 1:
            raise UsageError("derivative is defined for one-variable sums")
        terms = [(k, 1j * k[0] * c) for k, c in self.terms if k[0] != 0.0]
        return ExponentialSum.from_terms(1, terms)

    def __mul__(self, other):
        if isinstance(other, ExponentialSum):
            if other.n != self.n:
                raise UsageError("dimension mismatch in product")
            freqs = (self.frequencies[:, None, :] + other.frequencies[None, :, :]).reshape(-1, self.n)
            coefs = (self.coefficients[:, None] * other.coefficients[None, :]).ravel()
            return ExponentialSum.from_terms(self.n, zip(freqs.tolist(), coefs))
        if np.isscalar(other):
            return ExponentialSum.from_terms(self.n, [(k, c * other) for k, c in self.terms])
        return NotImplemented

    __rmul__ = __mul__

    def shifted(self, c) -> "ExponentialSum":
        """Multiply by exp(i⟨c, z⟩), a nowhere vanishing factor."""
        c = np.broadcast_to(np.asarray(c, dtype=np.float64), (self.n,))
        return ExponentialSum.from_terms(self.n, zip((self.frequencies + c).tolist(), self.coefficients))

    def __str__(self):
        parts = []
        for k, c in self.terms:
            phase = " + ".join(f"{f:g}*z{i + 1}" for i, f in enumerate(k) if f)
            parts.append(f"({c.real:g}{c.imag:+g}j)*exp(i({phase}))" if phase else f"({c.real:g}{c.imag:+g}j)")
        return " + ".join(parts)

    def integer_lattice(self, tol: float = 1e-12):
        """Return (base, offsets) when all frequency differences are integer vectors, else None."""
        base = self.frequencies[0]
        offsets = self.frequencies - base
        rounded = np.rint(offsets)
        if np.max(np.abs(offsets - rounded), initial=0.0) > tol:
            return None
        return base, rounded.astype(np.int64)


@dataclass(frozen=True)
class NewtonPolytope:
    vertices: tuple

    @cached_property
    def points(self) -> np.ndarray:
        return np.array(self.vertices, dtype=np.float64)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def support(self, u) -> np.ndarray:
        """h(u) = max over vertices of ⟨u, v⟩; u may be a stack of directions."""
        return np.max(np.asarray(u, dtype=np.float64) @ self.points.T, axis=-1)

    @cached_property
    def _directions(self) -> np.ndarray:
        dirs = [_direction_set(self.dim)]
        if len(self.vertices) > self.dim:
            try:
                hull = ConvexHull(self.points)
                dirs.append(hull.equations[:, :-1])
            except QhullError:
                pass
        return np.vstack(dirs)

    def contains(self, point, tol: float = 0.0) -> bool:
        """Support-function membership: ⟨u, p⟩ ≤ h(u) + tol over the direction set."""
        u = self._directions
        gap = u @ np.asarray(point, dtype=np.float64) - self.support(u)
        return bool(np.all(gap <= tol))

    def minkowski_sum(self, other: "NewtonPolytope") -> "NewtonPolytope":
        sums = (self.points[:, None, :] + other.points[None, :, :]).reshape(-1, self.dim)
        return NewtonPolytope(_extreme_points(np.unique(np.rint(sums).astype(np.int64), axis=0)))


def _direction_set(n: int) -> np.ndarray:
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        t = np.linspace(0.0, 2 * np.pi, 256, endpoint=False)
        return np.column_stack([np.cos(t), np.sin(t)])
    # Fibonacci sphere plus the coordinate axes
    k = np.arange(512) + 0.5
    phi = np.arccos(1 - 2 * k / 512)
    theta = np.pi * (1 + 5**0.5) * k
    sphere = np.column_stack([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)])
    axes = np.vstack([np.eye(n), -np.eye(n)])
    if n == 3:
        return np.vstack([sphere, axes])
    return axes


def _extreme_points(points: np.ndarray) -> tuple:
    """A point is extreme iff it is not a convex combination of the others."""
    m = len(points)
    if m == 1:
        return (tuple(int(v) for v in points[0]),)
    keep = []
    for i in range(m):
        others = np.delete(points, i, axis=0).astype(np.float64)
        a_eq = np.vstack([others.T, np.ones(m - 1)])
        b_eq = np.append(points[i].astype(np.float64), 1.0)
        res = linprog(np.zeros(m - 1), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
        if res.status != 0:
            keep.append(tuple(int(v) for v in points[i]))
    return tuple(sorted(keep))


def evaluate(P: LaurentPolynomial, z) -> complex | np.ndarray:
    """Σ c_α z^α; z has trailing dimension n and no zero component."""
    z = np.asarray(z, dtype=np.complex128)
    if z.shape[-1] != P.n:
        raise UsageError(f"expected {P.n} coordinates, got {z.shape[-1]}")
    if np.any(z == 0):
        raise DomainError("evaluation point has a zero coordinate")
    value = np.exp(np.log(z) @ P.exponents.T) @ P.coefficients
    return complex(value) if np.ndim(value) == 0 else value


def eval_fiber(P: LaurentPolynomial, y, theta) -> complex | np.ndarray:
    """P(e^{y_1+iθ_1}, …, e^{y_n+iθ_n}); y and θ broadcast against each other."""
    y = np.asarray(y, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    if y.shape[-1] != P.n or theta.shape[-1] != P.n:
        raise UsageError(f"expected {P.n} coordinates")
    value = np.exp((y + 1j * theta) @ P.exponents.T) @ P.coefficients
    return complex(value) if np.ndim(value) == 0 else value


def newton_polytope(P: LaurentPolynomial) -> NewtonPolytope:
    return NewtonPolytope(_extreme_points(P.exponents))


def pullback_exponential(P: LaurentPolynomial) -> ExponentialSum:
    """E*P(z) = P(e^{-iz_1}, …, e^{-iz_n}) = Σ c_α e^{-i⟨α, z⟩}."""
    return ExponentialSum.from_terms(P.n, zip((-P.exponents).tolist(), P.coefficients))


def partial_derivative(P: LaurentPolynomial, j: int) -> LaurentPolynomial:
    if not 0 <= j < P.n:
        raise UsageError(f"axis {j} out of range for n={P.n}")
    terms = []
    for k, c in P.terms:
        if k[j]:
            lowered = list(k)
            lowered[j] -= 1
            terms.append((lowered, k[j] * c))
    if not terms:
        raise ZeroPolynomialError(f"d/dz{j + 1} vanishes identically")
    return LaurentPolynomial.from_terms(P.n, terms)


@dataclass(frozen=True)
class UnivariateRestriction:
    """P restricted to one axis: z^shift · Σ coeffs[k] z^k (ascending powers)."""

    coeffs: np.ndarray
    shift: int


def restriction_rows(P: LaurentPolynomial, j: int, log_w) -> tuple[np.ndarray, int]:
    """Coefficient rows of P in z_j for a batch of fixed values of the other axes.

    ``log_w`` holds logarithms of the fixed values, shape (F, n-1). Returns an
    (F, K) array of ascending coefficients and the common lowest power. Entries
    that cancel to rounding level are set to exactly zero.
    """
    log_w = np.atleast_2d(np.asarray(log_w, dtype=np.complex128))
    others = np.delete(P.exponents, j, axis=1)
    powers = P.exponents[:, j]
    low = int(powers.min())
    width = int(powers.max()) - low + 1
    contrib = np.exp(log_w @ others.T.astype(np.float64)) * P.coefficients
    rows = np.zeros((log_w.shape[0], width), dtype=np.complex128)
    magnitude = np.zeros((log_w.shape[0], width))
    for t, p in enumerate(powers):
        rows[:, p - low] += contrib[:, t]
        magnitude[:, p - low] += np.abs(contrib[:, t])
    rows[np.abs(rows) <= CANCEL_RTOL * magnitude] = 0.0
    return rows, low


def univariate_restrict(P: LaurentPolynomial, j: int, w) -> UnivariateRestriction:
    """Restrict P to axis j with the remaining n-1 coordinates fixed to ``w``."""
    if not 0 <= j < P.n:
        raise UsageError(f"axis {j} out of range for n={P.n}")
    w = np.asarray(w, dtype=np.complex128).reshape(-1)
    if w.size != P.n - 1:
        raise UsageError(f"expected {P.n - 1} fixed values, got {w.size}")
    if np.any(w == 0):
        raise PreconditionError("fixed values must be nonzero")
    rows, low = restriction_rows(P, j, np.log(w)[None, :])
    row = rows[0]
    nonzero = np.flatnonzero(row)
    if nonzero.size == 0:
        raise DegenerateFiberError(f"restriction to z{j + 1} vanishes identically")
    first = int(nonzero[0])
    return UnivariateRestriction(coeffs=row[first:].copy(), shift=low + first)
