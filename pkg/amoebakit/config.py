import hashlib
import json
import os
from dataclasses import asdict, dataclass, replace
from pathlib import Path

from .errors import UsageError


_UNHASHED = ("threads", "out_dir", "log_level")


def _normalize_window(text: str | None) -> tuple[tuple[float, float], ...] | None:
    """Parse "lo1:hi1,lo2:hi2[,lo3:hi3]" into per-axis (lo, hi) pairs."""
    if not text:
        return None
    axes = []
    for chunk in str(text).split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            lo, hi = (float(v) for v in chunk.split(":"))
        except ValueError:
            raise UsageError(f"malformed window axis {chunk!r}, expected lo:hi") from None
        if not lo < hi:
            raise UsageError(f"window axis {chunk!r} needs lo < hi")
        axes.append((lo, hi))
    if not 1 <= len(axes) <= 3:
        raise UsageError("window must have 1 to 3 axes")
    return tuple(axes)


def _normalize_ladder(text) -> tuple[float, ...] | None:
    if text is None or text == "":
        return None
    if isinstance(text, (list, tuple)):
        values = [float(v) for v in text]
    else:
        try:
            values = [float(v) for v in str(text).split(",") if v.strip()]
        except ValueError:
            raise UsageError(f"malformed ladder {text!r}") from None
    return tuple(values)


def _truthy(val) -> bool:
    return str(val or "").lower() in ("1", "true", "yes", "y", "on")


class Config:
    """Process-wide defaults, read from the environment (optionally a .env file)."""

    SEED = int(os.environ.get("AMOEBA_SEED", "20240917"))
    THREADS = int(os.environ.get("AMOEBA_THREADS", "1"))
    OUT_DIR = os.environ.get("AMOEBA_OUT_DIR", "out")
    LOG_LEVEL = os.environ.get("AMOEBA_LOG_LEVEL", "INFO").upper()

    # Quadrature: starting nodes per axis, doubling cap, per-cell error target
    QUAD_NODES = int(os.environ.get("AMOEBA_QUAD_NODES", "64"))
    QUAD_CAP = int(os.environ.get("AMOEBA_QUAD_CAP", str(2**13)))
    ERR_TARGET = float(os.environ.get("AMOEBA_ERR_TARGET", "1e-6"))
    FIBERWISE = _truthy(os.environ.get("AMOEBA_FIBERWISE", "1"))

    WINDOW = os.environ.get("AMOEBA_WINDOW", "-3:3,-3:3")
    GRID_H = float(os.environ.get("AMOEBA_GRID_H", "0.05"))
    FIBER_ARGS = int(os.environ.get("AMOEBA_FIBER_ARGS", "1024"))
    LADDER = os.environ.get("AMOEBA_LADDER", "100,200,500,1000,2000")
    SAMPLES_PER_UNIT = int(os.environ.get("AMOEBA_SAMPLES_PER_UNIT", "16"))
    TAU_MASS = float(os.environ.get("AMOEBA_TAU_MASS", "1e-4"))
    FORMAT = os.environ.get("AMOEBA_FORMAT", "csv")


@dataclass(frozen=True)
class RunConfig:
    inputs: tuple = ()
    window: tuple = ((-3.0, 3.0), (-3.0, 3.0))
    grid_h: float = 0.05
    quad_nodes: int = 64
    quad_cap: int = 2**13
    err_target: float = 1e-6
    adaptive: bool = True
    fiberwise: bool = True
    fiber_args: int = 1024
    dilation_r: float | None = None
    ladder: tuple = (100.0, 200.0, 500.0, 1000.0, 2000.0)
    samples_per_unit: int = 16
    strip: tuple | None = None
    box: tuple | None = None
    y_points: tuple = ()
    cap_k: int = 1
    hartogs_q: int | None = None
    tau_mass: float = 1e-4
    seed: int = 20240917
    threads: int = 1
    out_dir: str = "out"
    formats: tuple = ("csv",)
    log_level: str = "INFO"

    @classmethod
    def defaults(cls) -> "RunConfig":
        return cls(
            window=_normalize_window(Config.WINDOW),
            grid_h=Config.GRID_H,
            quad_nodes=Config.QUAD_NODES,
            quad_cap=Config.QUAD_CAP,
            err_target=Config.ERR_TARGET,
            fiberwise=Config.FIBERWISE,
            fiber_args=Config.FIBER_ARGS,
            ladder=_normalize_ladder(Config.LADDER),
            samples_per_unit=Config.SAMPLES_PER_UNIT,
            tau_mass=Config.TAU_MASS,
            seed=Config.SEED,
            threads=Config.THREADS,
            out_dir=Config.OUT_DIR,
            formats=(Config.FORMAT,),
            log_level=Config.LOG_LEVEL,
        )

    @classmethod
    def load(cls, path: str | os.PathLike | None = None, **overrides) -> "RunConfig":
        """Defaults < environment < config file < explicit overrides (flags)."""
        config = cls.defaults()
        if path is not None:
            path = Path(path)
            if not path.is_file():
                raise UsageError(f"config file not found: {path}")
            try:
                data = json.loads(path.read_text(encoding="utf-8"))
            except json.JSONDecodeError as e:
                raise UsageError(f"config {path}: line {e.lineno} col {e.colno}: {e.msg}") from None
            config = config.merged(data, base_dir=path.parent)
        overrides = {k: v for k, v in overrides.items() if v is not None}
        return config.merged(overrides)

    def merged(self, data: dict, base_dir: Path | None = None) -> "RunConfig":
        known = set(self.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        values = dict(data)
        try:
            _normalize_values(values)
            if "inputs" in values:
                values["inputs"] = tuple(_resolve_input(item, base_dir) for item in values["inputs"])
        except (TypeError, ValueError) as e:
            raise UsageError(f"malformed config value: {e}") from None
        return replace(self, **values)

    @property
    def n(self) -> int:
        return len(self.window)

    def grid_spec(self):
        from .amoeba_geom import GridSpec

        return GridSpec(window=self.window, h=self.grid_h)

    def quad_spec(self, axes: int, nodes: int | None = None):
        from .num_kernels import QuadratureSpec

        return QuadratureSpec(nodes_per_axis=nodes or self.quad_nodes, axes=axes)

    def ladder_spec(self):
        from .ap_mean import LadderSpec

        return LadderSpec(s_values=self.ladder, samples_per_unit=self.samples_per_unit)

    def to_dict(self) -> dict:
        return asdict(self)

    def hash(self) -> str:
        """SHA-256 of the settings that change results (threads and paths excluded)."""
        data = {k: v for k, v in self.to_dict().items() if k not in _UNHASHED}
        payload = json.dumps(data, sort_keys=True, default=str)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _resolve_input(item, base_dir: Path | None):
    """Inline objects pass through; strings are file paths relative to the config file."""
    if isinstance(item, dict):
        return item
    from .formats import load_json

    path = Path(item)
    if base_dir is not None and not path.is_absolute():
        path = base_dir / path
    return load_json(path)



_SCALARS = {
    "grid_h": float,
    "err_target": float,
    "tau_mass": float,
    "dilation_r": float,
    "quad_nodes": int,
    "quad_cap": int,
    "fiber_args": int,
    "samples_per_unit": int,
    "cap_k": int,
    "hartogs_q": int,
    "seed": int,
    "threads": int,
}


def _normalize_values(values: dict) -> None:
    """Coerce raw JSON/flag values in place to the field types of RunConfig."""
    if "window" in values and isinstance(values["window"], str):
        values["window"] = _normalize_window(values["window"])
    elif "window" in values:
        values["window"] = tuple((float(lo), float(hi)) for lo, hi in values["window"])
    if "ladder" in values:
        values["ladder"] = _normalize_ladder(values["ladder"])
    if "formats" in values and isinstance(values["formats"], str):
        values["formats"] = (values["formats"],)
    for key in ("strip", "box", "y_points", "formats"):
        if key in values and values[key] is not None:
            values[key] = tuple(values[key])
    for key, kind in _SCALARS.items():
        if values.get(key) is not None:
            if isinstance(values[key], bool) or not isinstance(values[key], (int, float, str)):
                raise TypeError(f"{key} must be a number, got {values[key]!r}")
            values[key] = kind(values[key])
    for key in ("adaptive", "fiberwise"):
        if key in values and not isinstance(values[key], bool):
            values[key] = _truthy(values[key])
