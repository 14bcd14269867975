"""Desk-scale actor-critic laboratory for value divergence under high UTD ratios."""

from .agent import AgentConfig, SacAgent
from .config import RunConfig, load_config, parse_config, serialize_config
from .diagnostics import MetricsRecord, divergence_flag, effective_rank
from .envs import make_env
from .harness import run_priming, run_training

__version__ = "0.1.0"

__all__ = [
    "AgentConfig",
    "MetricsRecord",
    "RunConfig",
    "SacAgent",
    "divergence_flag",
    "effective_rank",
    "load_config",
    "make_env",
    "parse_config",
    "run_priming",
    "run_training",
    "serialize_config",
    "__version__",
]
