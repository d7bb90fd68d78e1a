"""Supporting caps and Hartogs figures on rasterized closed sets.

Everything here works at raster resolution: a cell belongs to Γ when it is
occupied, and geometric tests are made against cell centers in units of h.
"Nothing found" always means nothing found in the given search family.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .amoeba_geom import GridRegion
from .errors import NotConvertibleError, UsageError, WindowOverflowError
from .utils import parallel_map

logger = logging.getLogger(__name__)

TIE = 1e-9
EPS_STEPS = 8


@dataclass(frozen=True)
class CapCertificate:
    k: int
    frame: tuple
    base: tuple
    radius: float
    margin: float
    direction: tuple
    eps_max: float
    plane_axes: tuple | None = None

    def __post_init__(self):
        if not 0 < self.margin < self.radius:
            raise UsageError(f"cap margin must lie in (0, radius), got {self.margin}")
        if self.eps_max <= 0:
            raise UsageError("eps_max must be positive")
        if len(self.frame) != self.k:
            raise UsageError("frame must have k rows")

    def sort_key(self):
        return (self.plane_axes or (), self.base, self.radius, self.direction)

    def translated(self, offset) -> "CapCertificate":
        base = tuple(float(b + o) for b, o in zip(self.base, offset))
        return CapCertificate(self.k, self.frame, base, self.radius, self.margin, self.direction, self.eps_max, self.plane_axes)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "frame": [list(r) for r in self.frame],
            "base": list(self.base),
            "radius": self.radius,
            "margin": self.margin,
            "direction": list(self.direction),
            "eps_max": self.eps_max,
            "plane_axes": list(self.plane_axes) if self.plane_axes is not None else None,
        }


@dataclass(frozen=True)
class CapCheck:
    passed: bool
    failures: tuple = ()


@dataclass(frozen=True)
class HartogsFigure:
    """Figure of type (n−q, q) placed in the Im base.

    A point y has figure coordinates a = F(y − c − shift)/half_width and
    b = N(y − c − shift)/length. The hull is {|a|∞ < 1, |b|∞ < 1} and the
    H-part is the hull minus {|a|∞ ≤ β, |b|∞ ≥ α}.
    """

    q: int
    alpha: float
    beta: float
    center: tuple
    frame: tuple
    normal_frame: tuple
    half_width: float
    length: float
    shift: tuple

    def __post_init__(self):
        if not (0 < self.alpha < 1 and 0 < self.beta < 1):
            raise UsageError(f"alpha and beta must lie in (0, 1), got {self.alpha}, {self.beta}")

    def to_dict(self) -> dict:
        return {
            "q": self.q,
            "alpha": self.alpha,
            "beta": self.beta,
            "center": list(self.center),
            "frame": [list(r) for r in self.frame],
            "normal_frame": [list(r) for r in self.normal_frame],
            "half_width": self.half_width,
            "length": self.length,
            "shift": list(self.shift),
        }


@dataclass(frozen=True)
class HartogsCheck:
    figure_clear: bool
    hull_meets: bool

    @property
    def witness(self) -> bool:
        return self.figure_clear and self.hull_meets


@dataclass(frozen=True)
class SearchFamily:
    """Cap search family in units of the grid spacing h."""

    radii: tuple = (2.5, 4.5, 7.5)
    margin: float = 1.0
    eps_max: float = 4.0

    def to_dict(self) -> dict:
        return {"radii_h": list(self.radii), "margin_h": self.margin, "eps_max_h": self.eps_max, "planes": "axis-aligned"}


@dataclass(frozen=True)
class FigureFamily:
    """Axis-aligned Hartogs figures: half widths in h, lengths in even multiples of h."""

    half_widths: tuple = (2.5, 4.5)
    lengths: tuple = (2, 4)
    alphas: tuple = (0.3, 0.6)
    betas: tuple = (0.5, 0.8)

    def to_dict(self) -> dict:
        return {
            "half_widths_h": list(self.half_widths),
            "lengths_h": list(self.lengths),
            "alphas": list(self.alphas),
            "betas": list(self.betas),
        }


@dataclass(frozen=True)
class ScanReport:
    k: int
    certificates: tuple
    candidates: int
    family: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "found": len(self.certificates),
            "candidates": self.candidates,
            "family": self.family,
            "certificates": [c.to_dict() for c in self.certificates],
        }


def eps_grid(h: float, eps_max: float) -> np.ndarray:
    return np.geomspace(h / 2, eps_max, EPS_STEPS)


def _complement_frame(frame: np.ndarray, n: int, lead=None) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of ``frame`` rows, starting with ``lead`` if given."""
    seeds = ([lead] if lead is not None else []) + list(np.eye(n))
    basis = [row for row in frame]
    out = []
    for s in seeds:
        v = np.asarray(s, dtype=np.float64).copy()
        for b in basis + out:
            v -= (v @ b) * b
        norm = np.linalg.norm(v)
        if norm > 1e-9:
            out.append(v / norm)
        if len(out) == n - len(frame):
            break
    return np.array(out).reshape(n - len(frame), n)


def _check_room(region: GridRegion, center, frame: np.ndarray, in_plane: float, normal: float, travel) -> None:
    """The set center + {in-plane ball} ⊕ {normal ball} + [0, 1]·travel must fit in the window."""
    n = region.spec.n
    proj = frame.T @ frame if len(frame) else np.zeros((n, n))
    eye = np.eye(n)
    extent = np.array(
        [in_plane * np.linalg.norm(proj @ eye[i]) + normal * np.linalg.norm((eye - proj) @ eye[i]) for i in range(n)]
    )
    center = np.asarray(center, dtype=np.float64)
    travel = np.asarray(travel, dtype=np.float64)
    low = np.minimum(center, center + travel) - extent
    high = np.maximum(center, center + travel) + extent
    slack = 1e-9 * region.spec.h
    if np.any(low < region.spec.lo - slack) or np.any(high > region.spec.hi + slack):
        raise WindowOverflowError("figure does not fit in the raster window")


def verify_cap(region: GridRegion, cert: CapCertificate) -> CapCheck:
    """Check the three cap conditions against occupied cell centers."""
    spec = region.spec
    h = spec.h
    frame = np.asarray(cert.frame, dtype=np.float64).reshape(cert.k, spec.n)
    v = np.asarray(cert.direction, dtype=np.float64)
    if not np.isclose(np.linalg.norm(v), 1.0):
        raise UsageError("cap direction must be a unit vector")
    base = np.asarray(cert.base, dtype=np.float64)
    r = region.dilation_r
    _check_room(region, base, frame, cert.radius, r, cert.eps_max * v)

    pts = region.occupied_centers()
    rho, inner, slab = cert.radius / h, (cert.radius - cert.margin) / h, r / h

    def ball_hits(center):
        d = (pts - center) / h
        t = d @ frame.T
        normal = np.linalg.norm(d - t @ frame, axis=1)
        in_slab = normal <= slab + TIE
        dist = np.linalg.norm(t, axis=1)
        return dist[in_slab]

    failures = []
    dist = ball_hits(base)
    if not np.any(dist < rho - TIE):
        failures.append("empty")
    if np.any((dist >= inner - TIE) & (dist < rho - TIE)):
        failures.append("margin")
    for eps in eps_grid(h, cert.eps_max):
        if np.any(ball_hits(base + eps * v) < rho - TIE):
            failures.append(f"translate:{eps:.6g}")
            break
    return CapCheck(passed=not failures, failures=tuple(failures))


def _disc_kernel(n: int, plane_axes, lo: float, hi: float) -> np.ndarray:
    """Indicator of lo ≤ |d| < hi (cell units) over the plane axes, size 1 along the others."""
    reach = int(np.ceil(hi))
    shape = [2 * reach + 1 if a in plane_axes else 1 for a in range(n)]
    grids = np.meshgrid(*(np.arange(s) - s // 2 for s in shape), indexing="ij")
    dist = np.sqrt(sum(g.astype(np.float64) ** 2 for g in grids))
    return ((dist >= lo - TIE) & (dist < hi - TIE)).astype(np.int32)


def _slab_image(occ: np.ndarray, normal_axes, offset, radius: float) -> np.ndarray:
    """A[x] = any occupied x + d with d on the normal axes and |d − offset| ≤ radius (cell units)."""
    out = np.zeros_like(occ)
    if not normal_axes:
        return occ.copy()
    reach = int(np.ceil(radius + np.max(np.abs(offset)))) + 1
    shape = occ.shape
    for d in itertools.product(range(-reach, reach + 1), repeat=len(normal_axes)):
        if np.linalg.norm(np.array(d, dtype=np.float64) - offset) > radius + TIE:
            continue
        src = [slice(None)] * occ.ndim
        dst = [slice(None)] * occ.ndim
        skip = False
        for axis, step in zip(normal_axes, d):
            size = shape[axis]
            if abs(step) >= size:
                skip = True
                break
            if step >= 0:
                src[axis], dst[axis] = slice(step, size), slice(0, size - step)
            else:
                src[axis], dst[axis] = slice(0, size + step), slice(-step, size)
        if not skip:
            out[tuple(dst)] |= occ[tuple(src)]
    return out


def _room_mask(region: GridRegion, plane_axes, radius: float, eps_max: float, axis: int, sign: int) -> np.ndarray:
    spec = region.spec
    slack = 1e-9 * spec.h
    mask = np.ones(spec.shape, dtype=bool)
    for a in range(spec.n):
        centers = spec.axis_centers(a)
        extent = radius if a in plane_axes else region.dilation_r
        lo_c, hi_c = centers - extent, centers + extent
        if a == axis:
            lo_c, hi_c = np.minimum(lo_c, lo_c + sign * eps_max), np.maximum(hi_c, hi_c + sign * eps_max)
        ok = (lo_c >= spec.window[a][0] - slack) & (hi_c <= spec.window[a][1] + slack)
        view = [1] * spec.n
        view[a] = -1
        mask &= ok.reshape(view)
    return mask


def _scan_plane(region: GridRegion, k: int, plane_axes: tuple, family: SearchFamily) -> list[CapCertificate]:
    spec = region.spec
    h = spec.h
    n = spec.n
    normal_axes = tuple(a for a in range(n) if a not in plane_axes)
    occ = region.occupancy
    slab = region.dilation_r / h
    image = _slab_image(occ, normal_axes, np.zeros(len(normal_axes)), slab).astype(np.int32)
    frame = tuple(tuple(float(a == p) for a in range(n)) for p in plane_axes)
    found = []
    for radius in family.radii:
        inside = ndimage.correlate(image, _disc_kernel(n, plane_axes, 0.0, radius), mode="constant", cval=0)
        ring = ndimage.correlate(image, _disc_kernel(n, plane_axes, radius - family.margin, radius), mode="constant", cval=0)
        base_ok = (inside > 0) & (ring == 0)
        if not base_ok.any():
            continue
        disc = _disc_kernel(n, plane_axes, 0.0, radius)
        for axis in normal_axes:
            for sign in (1, -1):
                ok = base_ok & _room_mask(region, plane_axes, radius * h, family.eps_max * h, axis, sign)
                for eps in eps_grid(h, family.eps_max * h):
                    if not ok.any():
                        break
                    offset = np.array([sign * eps / h if a == axis else 0.0 for a in normal_axes])
                    shifted = _slab_image(occ, normal_axes, offset, slab).astype(np.int32)
                    ok &= ndimage.correlate(shifted, disc, mode="constant", cval=0) == 0
                direction = tuple(float(sign * (a == axis)) for a in range(n))
                for idx in np.argwhere(ok):
                    base = tuple(float(spec.axis_centers(a)[i]) for a, i in enumerate(idx))
                    found.append(
                        CapCertificate(k, frame, base, radius * h, family.margin * h, direction, family.eps_max * h, plane_axes)
                    )
    return found


def scan_caps(region: GridRegion, k: int, family: SearchFamily | None = None, threads: int = 1) -> ScanReport:
    """Axis-aligned supporting k-caps, each re-verified with :func:`verify_cap`."""
    n = region.spec.n
    if not 1 <= k <= n:
        raise UsageError(f"cap dimension must lie in [1, {n}], got {k}")
    family = family or SearchFamily()
    planes = list(itertools.combinations(range(n), k))
    batches = parallel_map(lambda axes: _scan_plane(region, k, axes, family), planes, threads)
    candidates = [c for batch in batches for c in batch]
    verified = [c for c in candidates if verify_cap(region, c).passed]
    if len(verified) < len(candidates):
        logger.warning("%d cap candidate(s) failed re-verification", len(candidates) - len(verified))
    verified.sort(key=CapCertificate.sort_key)
    logger.info("k=%d cap scan: %d certificate(s)", k, len(verified))
    return ScanReport(k, tuple(verified), len(candidates), {"h": region.spec.h, **family.to_dict()})


def _sup_norm(x: np.ndarray) -> np.ndarray:
    return np.abs(x).max(axis=1) if x.shape[1] else np.zeros(len(x))


def _figure_coords(points: np.ndarray, fig: HartogsFigure) -> tuple[np.ndarray, np.ndarray]:
    d = points - np.asarray(fig.center) - np.asarray(fig.shift)
    a = d @ np.asarray(fig.frame, dtype=np.float64).reshape(-1, points.shape[1]).T / fig.half_width
    b = d @ np.asarray(fig.normal_frame, dtype=np.float64).reshape(-1, points.shape[1]).T / fig.length
    return _sup_norm(a), _sup_norm(b)


def hartogs_check(region: GridRegion, fig: HartogsFigure) -> HartogsCheck:
    """(figure_clear, hull_meets) for the Im-projection of ``fig`` against Γ."""
    n = region.spec.n
    frame = np.asarray(fig.frame, dtype=np.float64).reshape(-1, n)
    normal = np.asarray(fig.normal_frame, dtype=np.float64).reshape(-1, n)
    center = np.asarray(fig.center) + np.asarray(fig.shift)
    box = np.vstack([frame * fig.half_width, normal * fig.length])
    extent = np.abs(box).sum(axis=0)
    slack = 1e-9 * region.spec.h
    if np.any(center - extent < region.spec.lo - slack) or np.any(center + extent > region.spec.hi + slack):
        raise WindowOverflowError("Hartogs figure does not fit in the raster window")
    pts = region.occupied_centers()
    if len(pts) == 0:
        return HartogsCheck(True, False)
    a, b = _figure_coords(pts, fig)
    hull = (a < 1 - TIE) & (b < 1 - TIE)
    h_part = hull & ((b < fig.alpha - TIE) | (a > fig.beta + TIE))
    return HartogsCheck(figure_clear=not h_part.any(), hull_meets=bool(hull.any()))


def cap_to_hartogs(cert: CapCertificate, region: GridRegion) -> HartogsFigure:
    """The (k, n−k) figure sitting half a translation above a verified cap."""
    spec = region.spec
    n = spec.n
    q = n - cert.k
    if q == 0:
        raise NotConvertibleError("cap not convertible at resolution h: no normal direction")
    frame = np.asarray(cert.frame, dtype=np.float64).reshape(cert.k, n)
    v = np.asarray(cert.direction, dtype=np.float64)
    v_normal = v - frame.T @ (frame @ v)
    if np.linalg.norm(v_normal) < 1e-9:
        raise NotConvertibleError("cap not convertible at resolution h: direction lies in the plane")
    normal = _complement_frame(frame, n, lead=v_normal / np.linalg.norm(v_normal))
    pts = region.occupied_centers()

    for length in np.geomspace(cert.eps_max, spec.h / 2, EPS_STEPS):
        for half_width in (cert.radius, cert.radius - cert.margin / 2):
            shift = 0.5 * length * v
            trial = HartogsFigure(q, 0.5, 0.5, tuple(cert.base), tuple(map(tuple, frame)), tuple(map(tuple, normal)),
                                  float(half_width), float(length), tuple(shift.tolist()))
            a, b = _figure_coords(pts, trial)
            hull = (a < 1 - TIE) & (b < 1 - TIE)
            if not hull.any():
                continue
            beta_min = float(a[hull].max())
            alpha_max = float(b[hull].min())
            if beta_min >= 1 - 2 * TIE or alpha_max <= 2 * TIE:
                continue
            fig = HartogsFigure(q, min(0.5, alpha_max / 2), (beta_min + 1) / 2, trial.center, trial.frame,
                                trial.normal_frame, trial.half_width, trial.length, trial.shift)
            try:
                check = hartogs_check(region, fig)
            except WindowOverflowError:
                continue
            if check.witness:
                return fig
    raise NotConvertibleError("cap not convertible at resolution h")


def _summed_area(occ: np.ndarray) -> np.ndarray:
    sat = occ.astype(np.int64)
    for axis in range(occ.ndim):
        sat = np.cumsum(sat, axis=axis)
    return np.pad(sat, [(1, 0)] * occ.ndim)


def _box_counts(sat: np.ndarray, lo: list[np.ndarray], hi: list[np.ndarray]) -> np.ndarray:
    """Occupied counts in index boxes [lo, hi) (per axis, broadcast arrays), clipped to the grid."""
    n = sat.ndim
    shape = [s - 1 for s in sat.shape]
    lo = [np.clip(l, 0, shape[a]) for a, l in enumerate(lo)]
    hi = [np.clip(u, 0, shape[a]) for a, u in enumerate(hi)]
    hi = [np.maximum(u, l) for l, u in zip(lo, hi)]
    total = 0
    for corner in itertools.product((0, 1), repeat=n):
        idx = tuple(hi[a] if c else lo[a] for a, c in enumerate(corner))
        sign = (-1) ** (n - sum(corner))
        total = total + sign * sat[idx]
    return total


def _open_reach(radius_cells: float) -> int:
    """Largest integer j with |j| < radius_cells."""
    return int(np.ceil(radius_cells - TIE)) - 1


def scan_hartogs(region: GridRegion, q: int, family: FigureFamily | None = None) -> list[HartogsFigure]:
    """Axis-aligned (n−q, q) figures centered on cells, scored with a summed-area table.

    Every candidate witness is re-checked with :func:`hartogs_check`.
    """
    spec = region.spec
    n = spec.n
    if not 1 <= q <= n - 1:
        raise UsageError(f"figure type needs 1 ≤ q ≤ n−1, got q={q}")
    family = family or FigureFamily()
    sat = _summed_area(region.occupancy)
    grids = np.meshgrid(*(np.arange(s) for s in spec.shape), indexing="ij")
    witnesses = []
    for plane_axes in itertools.combinations(range(n), n - q):
        normal_axes = [a for a in range(n) if a not in plane_axes]
        lead = normal_axes[0]
        for half_width, length, alpha, beta, sign in itertools.product(
            family.half_widths, family.lengths, family.alphas, family.betas, (1, -1)
        ):
            shift_cells = sign * length // 2
            r_hull_a = _open_reach(half_width)
            r_hull_b = _open_reach(length)
            r_beta = int(np.floor(beta * half_width + TIE))
            r_alpha = _open_reach(alpha * length)

            def box(ra, rb):
                lo, hi = [], []
                for a in range(n):
                    c = grids[a] + (shift_cells if a == lead else 0)
                    reach = ra if a in plane_axes else rb
                    lo.append(c - reach)
                    hi.append(c + reach + 1)
                return lo, hi

            room = np.ones(spec.shape, dtype=bool)
            for a in range(n):
                c = grids[a] + (shift_cells if a == lead else 0)
                reach = (half_width if a in plane_axes else length) - 0.5
                room &= (c - reach >= 0) & (c + reach <= spec.shape[a] - 1)
            hull = _box_counts(sat, *box(r_hull_a, r_hull_b))
            core = _box_counts(sat, *box(r_beta, r_hull_b)) - _box_counts(sat, *box(r_beta, r_alpha))
            hit = room & (hull > 0) & (hull == core)
            for idx in np.argwhere(hit):
                center = tuple(float(spec.axis_centers(a)[i]) for a, i in enumerate(idx))
                frame = tuple(tuple(float(a == p) for a in range(n)) for p in plane_axes)
                normal = tuple(tuple(float(a == m) * (sign if m == lead else 1) for a in range(n)) for m in normal_axes)
                shift = tuple(float(shift_cells * spec.h * (a == lead)) for a in range(n))
                fig = HartogsFigure(q, alpha, beta, center, frame, normal, half_width * spec.h, length * spec.h, shift)
                if hartogs_check(region, fig).witness:
                    witnesses.append(fig)
    logger.info("q=%d Hartogs scan: %d witness(es)", q, len(witnesses))
    return witnesses
