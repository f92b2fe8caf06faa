"""Policy-space diversity PSRO for two-player zero-sum games."""
from .config import RunConfig, load_config
from .errors import PsdPsroError
from .evaluation import exploitability, population_exploitability
from .games import GameTree, build_goofspiel, build_kuhn, build_leduc, build_rps
from .policy import BehavioralPolicy, MixedPolicy, Population
from .psro import load_run, run

__all__ = [
    "BehavioralPolicy", "GameTree", "MixedPolicy", "Population", "PsdPsroError", "RunConfig",
    "build_goofspiel", "build_kuhn", "build_leduc", "build_rps", "exploitability",
    "load_config", "load_run", "population_exploitability", "run",
]
