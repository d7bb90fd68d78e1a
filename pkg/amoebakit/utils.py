import json
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from werkzeug.utils import secure_filename

from .errors import UsageError

ALLOWED_OUTPUT_EXTS = {"csv", "json", "pgm", "svg"}


def save_output(out_dir: str, name: str, payload: bytes | str, *, meta: dict | None = None) -> str:
    """Write one output file plus its ``<file>.meta.json`` sidecar; returns the path."""
    filename = secure_filename(name or "")
    ext = filename.rsplit(".", 1)[-1].lower() if "." in filename else ""
    if ext not in ALLOWED_OUTPUT_EXTS:
        raise UsageError(f"Invalid output extension {ext!r}. Use: csv, json, pgm, svg")

    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, filename)
    data = payload.encode("utf-8") if isinstance(payload, str) else payload
    with open(path, "wb") as fh:
        fh.write(data)
    if meta is not None:
        with open(path + ".meta.json", "w", encoding="utf-8") as fh:
            fh.write(dumps(meta))
    return path


def dumps(obj) -> str:
    """Canonical JSON: sorted keys, numpy values converted, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2, default=_jsonable) + "\n"


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, (set, frozenset, tuple)):
        return list(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")


def parallel_map(fn, items, threads: int = 1) -> list:
    """Map in input order; thread count never changes the result."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def task_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent stream per (seed, key) so work items do not share state."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(k) for k in key)))
