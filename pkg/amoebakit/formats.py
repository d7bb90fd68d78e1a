"""Polynomial/exponential-sum JSON parsing and the CSV, PGM and SVG writers."""

import json
import numbers
from pathlib import Path

import numpy as np

from .amoeba_geom import PointCloud
from .errors import ParseError, UsageError
from .poly_core import ExponentialSum, LaurentPolynomial


def load_json(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"input file not found: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, f"{path}:{e.lineno}:{e.colno}") from None


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise ParseError(f"expected a number, got {type(value).__name__}", where)
    if not np.isfinite(value):
        raise ParseError("number is not finite", where)
    return float(value)


def _coefficient(value, where: str) -> complex:
    if isinstance(value, numbers.Real) and not isinstance(value, bool):
        return complex(_number(value, where))
    if not isinstance(value, list) or len(value) != 2:
        raise ParseError("coefficient must be [re, im] or a real number", where)
    return complex(_number(value[0], f"{where}[0]"), _number(value[1], f"{where}[1]"))


def _terms(obj, key: str, integer: bool) -> tuple[int, list]:
    if not isinstance(obj, dict):
        raise ParseError("expected an object", "$")
    if "n" not in obj:
        raise ParseError("missing field 'n'", "$")
    n = obj["n"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ParseError("'n' must be a positive integer", "$.n")
    raw = obj.get("terms")
    if not isinstance(raw, list) or not raw:
        raise ParseError("'terms' must be a non-empty list", "$.terms")
    terms = []
    for i, term in enumerate(raw):
        where = f"$.terms[{i}]"
        if not isinstance(term, dict):
            raise ParseError("term must be an object", where)
        if key not in term or "c" not in term:
            raise ParseError(f"term needs '{key}' and 'c'", where)
        exps = term[key]
        if not isinstance(exps, list) or len(exps) != n:
            raise ParseError(f"'{key}' must list {n} entries", f"{where}.{key}")
        if integer:
            for j, e in enumerate(exps):
                if isinstance(e, bool) or not isinstance(e, int):
                    raise ParseError("exponent must be an integer", f"{where}.{key}[{j}]")
            vector = [int(e) for e in exps]
        else:
            vector = [_number(e, f"{where}.{key}[{j}]") for j, e in enumerate(exps)]
        terms.append((vector, _coefficient(term["c"], f"{where}.c")))
    return n, terms


def parse_polynomial(obj) -> LaurentPolynomial:
    """{"n": int, "terms": [{"e": [ints], "c": [re, im]}]}"""
    n, terms = _terms(obj, "e", integer=True)
    return LaurentPolynomial.from_terms(n, terms)


def parse_exponential(obj) -> ExponentialSum:
    """{"n": int, "terms": [{"f": [reals], "c": [re, im]}]}"""
    n, terms = _terms(obj, "f", integer=False)
    return ExponentialSum.from_terms(n, terms)


def parse_points(obj) -> PointCloud:
    """{"points": [[y1, ..., yn], ...]}: a synthetic closed set for the cap scanner."""
    raw = obj.get("points")
    if not isinstance(raw, list) or not raw:
        raise ParseError("'points' must be a non-empty list", "$.points")
    n = len(raw[0]) if isinstance(raw[0], list) else 0
    if not 1 <= n <= 3:
        raise ParseError("points need 1 to 3 coordinates", "$.points[0]")
    rows = []
    for i, p in enumerate(raw):
        if not isinstance(p, list) or len(p) != n:
            raise ParseError(f"point must list {n} coordinates", f"$.points[{i}]")
        rows.append([_number(v, f"$.points[{i}][{j}]") for j, v in enumerate(p)])
    return PointCloud(n, np.array(rows), {"synthetic": True})


def parse_input(obj):
    """Dispatch on the shape: "points" clouds, "e" Laurent polynomials, "f" exponential sums."""
    if isinstance(obj, dict) and "points" in obj:
        return parse_points(obj)
    terms = obj.get("terms") if isinstance(obj, dict) else None
    if isinstance(terms, list) and terms and isinstance(terms[0], dict) and "f" in terms[0]:
        return parse_exponential(obj)
    return parse_polynomial(obj)


def to_json_obj(value) -> dict:
    key = "f" if isinstance(value, ExponentialSum) else "e"
    return {
        "n": value.n,
        "terms": [{key: list(k), "c": [c.real, c.imag]} for k, c in value.terms],
    }


def write_csv(header: list[str], rows) -> str:
    """Rows of numbers at 17 significant digits."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format(float(v), ".17g") for v in np.atleast_1d(row)))
    return "\n".join(lines) + "\n"


def cloud_csv(points: np.ndarray) -> str:
    n = points.shape[1] if points.ndim == 2 else 1
    return write_csv([f"y{i + 1}" for i in range(n)], points.reshape(-1, n))


def field_csv(centers: np.ndarray, columns: dict) -> str:
    n = centers.shape[1]
    header = [f"y{i + 1}" for i in range(n)] + list(columns)
    data = np.column_stack([centers] + [np.asarray(c, dtype=np.float64).reshape(-1) for c in columns.values()])
    return write_csv(header, data)


def pgm(image: np.ndarray) -> bytes:
    """Binary P5 image of a 2D array; booleans map to black on white, reals are scaled to 0..255.

    Row 0 of the file is the top of the window (largest y2).
    """
    if image.ndim != 2:
        raise UsageError("PGM export needs a 2D slice")
    if image.dtype == bool:
        pixels = np.where(image, 0, 255).astype(np.uint8)
    else:
        finite = np.where(np.isfinite(image), image, np.nan)
        lo, hi = np.nanmin(finite), np.nanmax(finite)
        scale = (finite - lo) / (hi - lo) if hi > lo else np.zeros_like(finite)
        pixels = np.nan_to_num(scale * 255).astype(np.uint8)
    pixels = np.flipud(pixels.T)
    height, width = pixels.shape
    return f"P5\n{width} {height}\n255\n".encode("ascii") + pixels.tobytes()


def svg(region_mask: np.ndarray, window, points: np.ndarray | None = None, size: int = 600) -> str:
    """Occupied cells as grey squares with sample points overlaid (2D only)."""
    if region_mask.ndim != 2:
        raise UsageError("SVG export needs a 2D slice")
    (x0, x1), (y0, y1) = window
    nx, ny = region_mask.shape
    cw, ch = size / nx, size / ny
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">']
    for i, j in np.argwhere(region_mask):
        parts.append(f'<rect x="{i * cw:.3f}" y="{size - (j + 1) * ch:.3f}" width="{cw:.3f}" height="{ch:.3f}" fill="#bbb"/>')
    if points is not None and len(points):
        px = (points[:, 0] - x0) / (x1 - x0) * size
        py = size - (points[:, 1] - y0) / (y1 - y0) * size
        step = max(1, len(points) // 20000)
        for x, y in zip(px[::step], py[::step]):
            parts.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="0.6" fill="#c00"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
