from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

import yaml

from .errors import ConfigError


TREE_GAMES = ("kuhn", "leduc", "goofspiel", "rps", "matrix")
FUNCTIONAL_GAMES = ("mixture7", "disc")
GAMES = TREE_GAMES + FUNCTIONAL_GAMES
VARIANTS = ("psro", "psro-rn", "psd-psro")
ORACLE_MODES = ("best-response", "exact-gradient", "reinforce")
DISTANCE_MODES = ("exact", "sampled")
PRIZE_ORDERS = ("fixed-ascending", "chance-shuffled")

# Diversity weights used for each benchmark.
LAMBDA_DEFAULTS: Dict[str, float] = {
    "mixture7": 1.9,
    "disc": 1.9,
    "leduc": 0.1,
    "goofspiel": 0.1,
    "matrix": 0.85,
    "rps": 0.85,
    "kuhn": 0.5,
}

PE_EVERY_DEFAULTS: Dict[str, int] = {"goofspiel": 5, "leduc": 5}

# (learning rate, steps) of the oracle. mixture7 points saturate away from the
# hump circle, where short strides stall.
ORACLE_STEP_DEFAULTS: Dict[str, Tuple[float, int]] = {"mixture7": (10.0, 200)}
DEFAULT_ORACLE_STEPS: Tuple[float, int] = (1.0, 100)


@dataclass(frozen=True)
class DistanceConfig:
    mode: str = "exact"
    samples: int = 1000
    hull_samples: int = 10
    # share of the uniform policy blended into the weighting opponent b_{-i}
    blend: float = 0.01

    def __post_init__(self):
        if self.mode not in DISTANCE_MODES:
            raise ConfigError(f"distance mode must be one of {DISTANCE_MODES}, got {self.mode!r}")
        if self.samples < 1 or self.hull_samples < 1:
            raise ConfigError("distance samples and hull samples must be >= 1")
        if not 0.0 < self.blend <= 1.0:
            raise ConfigError("distance blend must lie in (0, 1]")


@dataclass(frozen=True)
class OracleConfig:
    lam: float = 0.0
    learning_rate: float = 1.0
    steps: int = 100
    mode: str = "best-response"
    episodes: int = 64
    baseline: bool = True
    gamma: float = 1.0
    support_floor: float = 1e-3
    seed: int = 0
    # REINFORCE: reuse the episodes against sigma for the KL terms
    share_rollouts: bool = True
    distance: DistanceConfig = field(default_factory=DistanceConfig)

    def __post_init__(self):
        if self.mode not in ORACLE_MODES:
            raise ConfigError(f"oracle mode must be one of {ORACLE_MODES}, got {self.mode!r}")
        if self.lam < 0:
            raise ConfigError("lambda must be >= 0")
        if self.steps < 1 or self.episodes < 1:
            raise ConfigError("oracle steps and episodes must be >= 1")
        if self.learning_rate < 0:
            raise ConfigError("learning rate must be >= 0")
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError("gamma must lie in (0, 1]")


@dataclass(frozen=True)
class GameConfig:
    name: str = "kuhn"
    goofspiel_cards: int = 5
    prize_order: str = "fixed-ascending"
    score_difference: bool = False
    matrix_path: Optional[str] = None
    hump_radius: float = 2.0
    hump_scale: Optional[float] = None

    def __post_init__(self):
        if self.name not in GAMES:
            raise ConfigError(f"game must be one of {GAMES}, got {self.name!r}")
        if self.prize_order not in PRIZE_ORDERS:
            raise ConfigError(f"prize order must be one of {PRIZE_ORDERS}")
        if self.name == "matrix" and not self.matrix_path:
            raise ConfigError("game 'matrix' needs a matrix file")


@dataclass(frozen=True)
class RunConfig:
    game: GameConfig = field(default_factory=GameConfig)
    variant: str = "psro"
    iterations: int = 10
    oracle: OracleConfig = field(default_factory=OracleConfig)
    exploitability: bool = True
    pe: bool = True
    pe_every: int = 1
    pe_eps: float = 1e-6
    diversity: bool = True
    seed: int = 0
    out_dir: Optional[str] = None
    workers: int = 1
    deterministic: bool = True
    allow_zero_lambda: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if self.pe_eps <= 0:
            raise ConfigError("PE tolerance must be > 0")
        if self.pe_every < 1 or self.workers < 1:
            raise ConfigError("pe_every and workers must be >= 1")
        if self.variant == "psd-psro":
            if self.oracle.lam <= 0 and not self.allow_zero_lambda:
                raise ConfigError("psd-psro needs lambda > 0 (pass allow_zero_lambda to override)")
            if self.oracle.mode == "best-response" and self.game.name in TREE_GAMES:
                raise ConfigError("psd-psro needs oracle mode exact-gradient or reinforce")


def _deep_get(d: Mapping[str, Any], path: str, default=None):
    cur: Any = d
    for part in path.split("."):
        if not isinstance(cur, dict) or part not in cur:
            return default
        cur = cur[part]
    return default if cur is None else cur


def _deep_set(d: Dict[str, Any], path: str, value: Any) -> None:
    parts = path.split(".")
    cur = d
    for part in parts[:-1]:
        nxt = cur.get(part)
        if not isinstance(nxt, dict):
            nxt = {}
            cur[part] = nxt
        cur = nxt
    cur[parts[-1]] = value


def _merge(base: Dict[str, Any], over: Mapping[str, Any]) -> Dict[str, Any]:
    out = copy.deepcopy(base)
    for key, value in over.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def read_config_file(path: Path) -> Dict[str, Any]:
    """YAML or JSON file -> dict (JSON is valid YAML)."""
    try:
        with Path(path).open("r", encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"config file {path} is not valid YAML/JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a mapping at top level")
    return data


def build_config(data: Mapping[str, Any]) -> RunConfig:
    try:
        game = GameConfig(
            name=str(_deep_get(data, "game.name", "kuhn")),
            goofspiel_cards=int(_deep_get(data, "game.goofspiel_cards", 5)),
            prize_order=str(_deep_get(data, "game.prize_order", "fixed-ascending")),
            score_difference=bool(_deep_get(data, "game.score_difference", False)),
            matrix_path=_deep_get(data, "game.matrix_path", None),
            hump_radius=float(_deep_get(data, "game.hump_radius", 2.0)),
            hump_scale=_deep_get(data, "game.hump_scale", None),
        )
        variant = str(_deep_get(data, "variant", "psro"))

        lam = _deep_get(data, "oracle.lam", None)
        if lam is None:
            lam = LAMBDA_DEFAULTS.get(game.name, 0.0) if variant == "psd-psro" else 0.0

        distance = DistanceConfig(
            mode=str(_deep_get(data, "oracle.distance.mode", "exact")),
            samples=int(_deep_get(data, "oracle.distance.samples", 1000)),
            hull_samples=int(_deep_get(data, "oracle.distance.hull_samples", 10)),
            blend=float(_deep_get(data, "oracle.distance.blend", 0.01)),
        )
        seed = int(_deep_get(data, "seed", 0))
        default_mode = "exact-gradient" if variant == "psd-psro" else "best-response"
        default_lr, default_steps = ORACLE_STEP_DEFAULTS.get(game.name, DEFAULT_ORACLE_STEPS)
        oracle = OracleConfig(
            lam=float(lam),
            learning_rate=float(_deep_get(data, "oracle.learning_rate", default_lr)),
            steps=int(_deep_get(data, "oracle.steps", default_steps)),
            mode=str(_deep_get(data, "oracle.mode", default_mode)),
            episodes=int(_deep_get(data, "oracle.episodes", 64)),
            baseline=bool(_deep_get(data, "oracle.baseline", True)),
            gamma=float(_deep_get(data, "oracle.gamma", 1.0)),
            support_floor=float(_deep_get(data, "oracle.support_floor", 1e-3)),
            seed=int(_deep_get(data, "oracle.seed", seed)),
            share_rollouts=bool(_deep_get(data, "oracle.share_rollouts", True)),
            distance=distance,
        )

        pe_every = _deep_get(data, "metrics.pe_every", None)
        if pe_every is None:
            pe_every = PE_EVERY_DEFAULTS.get(game.name, 1)

        return RunConfig(
            game=game,
            variant=variant,
            iterations=int(_deep_get(data, "iterations", 10)),
            oracle=oracle,
            exploitability=bool(_deep_get(data, "metrics.exploitability", True)),
            pe=bool(_deep_get(data, "metrics.pe", True)),
            pe_every=int(pe_every),
            pe_eps=float(_deep_get(data, "metrics.pe_eps", 1e-6)),
            diversity=bool(_deep_get(data, "metrics.diversity", True)),
            seed=seed,
            out_dir=_deep_get(data, "out_dir", None),
            workers=int(_deep_get(data, "workers", 1)),
            deterministic=bool(_deep_get(data, "deterministic", True)),
            allow_zero_lambda=bool(_deep_get(data, "allow_zero_lambda", False)),
        )
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid config value: {e}") from e


def load_config(config_path: Path | None = None,
                overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """
    Layering, later wins:
      1) project config.yaml
      2) config_path (YAML or JSON), if given
      3) overrides: {"oracle.lam": 0.5, "game.name": "leduc", ...}
    """
    project_root = Path(__file__).resolve().parents[2]
    data: Dict[str, Any] = {}
    defaults = project_root / "config.yaml"
    if defaults.exists():
        data = read_config_file(defaults)
    if config_path is not None:
        data = _merge(data, read_config_file(config_path))
    for key, value in (overrides or {}).items():
        if value is not None:
            _deep_set(data, key, value)
    return build_config(data)


def config_to_dict(config: RunConfig) -> Dict[str, Any]:
    return asdict(config)


def save_config(config: RunConfig, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as f:
        json.dump(config_to_dict(config), f, indent=2, sort_keys=True)
        f.write("\n")


def config_from_json(path: Path) -> RunConfig:
    """Rebuild a RunConfig from a config.json echo."""
    data = read_config_file(path)
    flat = copy.deepcopy(data)
    metrics = {k: flat.pop(k) for k in ("exploitability", "pe", "pe_every", "pe_eps", "diversity")
               if k in flat}
    flat["metrics"] = metrics
    flat["iterations"] = data.get("iterations", 1)
    return build_config(flat)
