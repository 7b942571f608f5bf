# src/settings.py - Shared solver settings and logging setup

import os
import logging
from rich.console import Console
from rich.logging import RichHandler

# Numerical tolerances
DEFAULT_TOL = 1e-9
REACH_TOL = 1e-12
ITERATION_CAP = 10 ** 7
ADMISSIBILITY_BAND = 1e-9
THRESHOLD_BAND = 1e-12
BID_TOLERANCE = 1e-12

# Optimizer and simulation defaults
DEFAULT_GRID = 512
DEFAULT_WINDOW = 0.5
DEFAULT_SEED = 0
CURVE_GRID = 33

# Discrete oracle caps (desk scale)
MAX_UNITS = 64
MAX_HORIZON = 64
MAX_VERTICES = 6

OUTPUT_DIR = 'output'

stderr_console = Console(stderr=True)

logger = logging.getLogger(__name__)


def worker_count() -> int:
    """Worker cap for thread pools, overridable with BIDGAME_THREADS"""
    default = min(8, os.cpu_count() or 1)
    raw = os.environ.get('BIDGAME_THREADS')
    if not raw:
        return default
    try:
        value = int(raw)
    except ValueError:
        logger.warning("Ignoring BIDGAME_THREADS=%r (not an integer)", raw)
        return default
    if value < 1:
        logger.warning("Ignoring BIDGAME_THREADS=%r (must be positive)", raw)
        return default
    return value


def configure_logging(verbose: bool = False) -> None:
    """Route all library logging through a rich handler on stderr"""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=stderr_console, show_path=False)],
        force=True,
    )
