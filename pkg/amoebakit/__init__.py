import logging
import os
from dataclasses import dataclass

from .config import RunConfig
from .errors import UsageError
from .utils import save_output

__version__ = "0.3.0"

logger = logging.getLogger(__name__)


def _ensure_out_dir(config: RunConfig) -> None:
    """Creates the output directory and fails early if it cannot be written."""
    try:
        os.makedirs(config.out_dir, exist_ok=True)
    except OSError as e:
        raise UsageError(f"cannot create output directory {config.out_dir}: {e}") from None
    if not os.access(config.out_dir, os.W_OK):
        raise UsageError(f"output directory {config.out_dir} is not writable")


def _configure_logging(level: str) -> None:
    root = logging.getLogger()
    if not root.handlers:
        logging.basicConfig(format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    root.setLevel(getattr(logging, str(level).upper(), logging.INFO))


@dataclass
class RunContext:
    config: RunConfig
    command: str

    def meta(self) -> dict:
        return {
            "config_hash": self.config.hash(),
            "seed": self.config.seed,
            "version": __version__,
            "command": self.command,
        }

    def save(self, name: str, payload) -> str:
        path = save_output(self.config.out_dir, name, payload, meta=self.meta())
        logger.info("wrote %s", path)
        return path


def create_run(config_path=None, command: str = "", **overrides) -> RunContext:
    config = RunConfig.load(config_path, **overrides)
    _configure_logging(config.log_level)
    _ensure_out_dir(config)

    logger.debug("run %s: config %s seed %d threads %d", command, config.hash()[:12], config.seed, config.threads)
    return RunContext(config=config, command=command)
