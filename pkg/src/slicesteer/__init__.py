"""slicesteer: deterministic RAN-slicing simulator with steerable DQN agents."""

__version__ = "0.1.0"

from .config import SimConfig, default_config, load_config  # noqa: F401
from .simulation import RunResult, run_simulation  # noqa: F401
