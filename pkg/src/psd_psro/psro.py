"""
The PSRO loop and its variants, plus the run directory:

    <out>/config.json     resolved RunConfig
    <out>/metrics.csv     one IterationLog row per iteration
    <out>/oracle.csv      per-step oracle progress (gradient oracles)
    <out>/meta.txt        final payoff matrix and meta-NE (+ members.txt)
    <out>/policies/       p<player>_<k>.txt per member, or p<player>_points.txt
"""
from __future__ import annotations

import concurrent.futures
import logging
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import GameConfig, RunConfig, config_from_json, save_config
from .diversity import effective_diversity, expected_cardinality
from .errors import ConfigError, GameError, RunDirectoryError
from .evaluation import (DEFAULT_PE_EPS, EvalReport, best_response, exploitability,
                         mixed_utility, outcome_probabilities, pe_terms, realize)
from .functional import FunctionalGame2D, PointPolicy, load_points, project_to_domain, save_points
from .games import (GameTree, build_goofspiel, build_kuhn, build_leduc, build_rps,
                    load_matrix_game, matrix_tree)
from .logger import (ABLATION_HEADER, EVAL_HEADER, ORACLE_HEADER, IterationLog, append_iteration,
                     append_row, ensure_csv, parse_optional, read_rows)
from .meta_solver import (MetaGame, MetaNE, fill_payoff_matrix, read_meta_ne, rectified_weights,
                          save_meta_game)
from .oracle import psd_oracle_exact, psd_oracle_point, psd_oracle_reinforce
from .policy import BehavioralPolicy, MixedPolicy, Population, load_policy, save_policy

log = logging.getLogger(__name__)

METRICS_FILE = "metrics.csv"
ORACLE_FILE = "oracle.csv"
EVAL_FILE = "eval.csv"
META_FILE = "meta.txt"
CONFIG_FILE = "config.json"
POLICY_DIR = "policies"


def make_game(cfg: GameConfig) -> Any:
    if cfg.name == "kuhn":
        return build_kuhn()
    if cfg.name == "leduc":
        return build_leduc()
    if cfg.name == "goofspiel":
        return build_goofspiel(cfg.goofspiel_cards, cfg.prize_order, cfg.score_difference)
    if cfg.name == "rps":
        return build_rps()
    if cfg.name == "matrix":
        return matrix_tree(load_matrix_game(Path(cfg.matrix_path)), "matrix")
    if cfg.name in ("mixture7", "disc"):
        return FunctionalGame2D(cfg.name, cfg.hump_radius, cfg.hump_scale)
    raise ConfigError(f"unknown game {cfg.name!r}")


def initial_policies(game: Any, seed: int) -> Tuple[Any, Any]:
    """Uniform policies on trees; seeded random points on functional games."""
    if isinstance(game, GameTree):
        return BehavioralPolicy.uniform(game, 1), BehavioralPolicy.uniform(game, 2)
    rng = np.random.default_rng(seed)
    return tuple(PointPolicy(p, project_to_domain(game, rng.uniform(-1.0, 1.0, size=2)))
                 for p in (1, 2))


@dataclass
class RunResult:
    game: Any
    config: RunConfig
    populations: Tuple[Population, Population]
    meta: MetaGame
    logs: List[IterationLog]
    run_dir: Optional[Path] = None

    def meta_strategies(self) -> Tuple[MixedPolicy, MixedPolicy]:
        ne = self.meta.solved().ne
        return MixedPolicy(self.populations[0], ne.row), MixedPolicy(self.populations[1], ne.col)

    def final_exploitability(self) -> float:
        m1, m2 = self.meta_strategies()
        return exploitability(self.game, realize(self.game, m1), realize(self.game, m2))


# -- one player's oracle phase -----------------------------------------------------

@dataclass
class _Training:
    policies: List[Any]
    objective: Optional[float]
    oracle_rows: List[list]


def _oracle_call(game: Any, cfg: RunConfig, player: int, opponent: MixedPolicy,
                 population: Population, init: Any, rng: np.random.Generator,
                 rows: List[list], iteration: int) -> Tuple[Any, float]:
    lam = cfg.oracle.lam if cfg.variant == "psd-psro" else 0.0
    oracle_cfg = replace(cfg.oracle, lam=lam)

    def progress(step, parts, grad_norm):
        rows.append([iteration, player, step, parts.objective, parts.utility,
                     parts.distance, grad_norm])

    if isinstance(game, FunctionalGame2D):
        if cfg.variant != "psd-psro" and cfg.oracle.mode == "best-response":
            return best_response(game, opponent, player)
        res = psd_oracle_point(game, opponent, population, oracle_cfg, rng, init, progress)
        return res.policy, res.objective
    if cfg.oracle.mode == "best-response":
        return best_response(game, opponent, player)
    if cfg.oracle.mode == "exact-gradient":
        res = psd_oracle_exact(game, opponent, population, oracle_cfg, init=init, rng=rng,
                               progress=progress)
    else:
        res = psd_oracle_reinforce(game, opponent, population, oracle_cfg, rng, init=init,
                                   progress=progress)
    return res.policy, res.objective


def _train(game: Any, cfg: RunConfig, player: int, meta: MetaGame, iteration: int) -> _Training:
    ne = meta.ne
    own_pop, opp_pop = (meta.row, meta.col) if player == 1 else (meta.col, meta.row)
    own_w, opp_w = (ne.row, ne.col) if player == 1 else (ne.col, ne.row)
    rng = np.random.default_rng([cfg.seed, iteration, player])
    rows: List[list] = []

    if cfg.variant != "psro-rn":
        opponent = MixedPolicy(opp_pop, opp_w)
        init = own_pop[len(own_pop) - 1]
        policy, value = _oracle_call(game, cfg, player, opponent, own_pop, init, rng, rows, iteration)
        return _Training([policy], value, rows)

    m = meta.for_player(player)
    policies, values = [], []
    for k in np.flatnonzero(own_w > 0):
        weights = rectified_weights(m, own_w, opp_w, int(k))
        opponent = MixedPolicy(opp_pop, weights)
        policy, value = _oracle_call(game, cfg, player, opponent, own_pop, own_pop[int(k)],
                                     rng, rows, iteration)
        policies.append(policy)
        values.append(value)
    return _Training(policies, float(np.mean(values)), rows)


# -- the loop ----------------------------------------------------------------------

def _as_population(player: int, initial) -> Population:
    members = tuple(initial) if isinstance(initial, (list, tuple)) else (initial,)
    return Population(player, members)


def _prepare_run_dir(cfg: RunConfig) -> Optional[Path]:
    if not cfg.out_dir:
        return None
    run_dir = Path(cfg.out_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    for name in (METRICS_FILE, ORACLE_FILE):
        stale = run_dir / name
        if stale.exists():
            log.warning("overwriting %s", stale)
            stale.unlink()
    policy_dir = run_dir / POLICY_DIR
    if policy_dir.is_dir():
        for stale in policy_dir.glob("p[12]_*.txt"):
            stale.unlink()
    save_config(cfg, run_dir / CONFIG_FILE)
    return run_dir


def _metrics(game: Any, cfg: RunConfig, meta: MetaGame, iteration: int) -> Dict[str, Optional[float]]:
    out: Dict[str, Optional[float]] = {"exploitability": None, "pe": None,
                                       "eff_div": None, "exp_card": None}
    ne = meta.ne
    if cfg.exploitability:
        out["exploitability"] = exploitability(game, realize(game, MixedPolicy(meta.row, ne.row)),
                                               realize(game, MixedPolicy(meta.col, ne.col)))
    if cfg.pe and iteration % cfg.pe_every == 0:
        out["pe"] = pe_terms(game, meta.row, meta.col, cfg.pe_eps).pe
    if cfg.diversity:
        out["eff_div"] = effective_diversity(meta)
        out["exp_card"] = expected_cardinality(meta)
    return out


def run(config: RunConfig, initial: Optional[Tuple[Any, Any]] = None,
        game: Any = None) -> RunResult:
    """
    Solve the meta-game at the start of every iteration, train each player's
    oracle against the other's meta-NE, grow the populations and fill the
    new payoff entries. `initial` overrides the starting populations (a policy
    or a sequence of policies per player).
    """
    game = game if game is not None else make_game(config.game)
    if initial is None:
        initial = initial_policies(game, config.seed)
    pops = (_as_population(1, initial[0]), _as_population(2, initial[1]))
    run_dir = _prepare_run_dir(config)
    parallel = not config.deterministic and config.workers > 1
    workers = config.workers if parallel else 1

    meta = fill_payoff_matrix(game, pops[0], pops[1], workers=workers).solved()
    logs: List[IterationLog] = []
    log.info("%s on %s: %d iterations, seed %d", config.variant, config.game.name,
             config.iterations, config.seed)
    try:
        for t in range(config.iterations):
            started = time.perf_counter()
            metrics = _metrics(game, config, meta, t)
            if parallel:
                with concurrent.futures.ThreadPoolExecutor(max_workers=2) as pool:
                    jobs = [pool.submit(_train, game, config, p, meta, t) for p in (1, 2)]
                    trained = [j.result() for j in jobs]
            else:
                trained = [_train(game, config, p, meta, t) for p in (1, 2)]

            entry = IterationLog(
                iteration=t, exploitability=metrics["exploitability"], pe=metrics["pe"],
                oracle_obj_p1=trained[0].objective, oracle_obj_p2=trained[1].objective,
                pop_size_p1=len(meta.row), pop_size_p2=len(meta.col),
                eff_div=metrics["eff_div"], exp_card=metrics["exp_card"],
                time_ms=None if config.deterministic else 1000.0 * (time.perf_counter() - started))
            logs.append(entry)
            if run_dir is not None:
                append_iteration(run_dir / METRICS_FILE, entry)
                for tr in trained:
                    for row in tr.oracle_rows:
                        append_row(run_dir / ORACLE_FILE, ORACLE_HEADER, row)
            log.info("iter %d: exploitability=%s pe=%s pop=(%d, %d)", t, metrics["exploitability"],
                     metrics["pe"], len(meta.row), len(meta.col))

            pops = (pops[0].extended(*trained[0].policies), pops[1].extended(*trained[1].policies))
            meta = fill_payoff_matrix(game, pops[0], pops[1], previous=meta, workers=workers).solved()
    except Exception:
        if run_dir is not None:
            log.error("run aborted at iteration %d; partial results kept in %s", len(logs), run_dir)
            save_run(run_dir, game, meta)
        raise

    if run_dir is not None:
        save_run(run_dir, game, meta)
    return RunResult(game, config, pops, meta, logs, run_dir)


def run_rectified(config: RunConfig, initial: Optional[Tuple[Any, Any]] = None,
                  game: Any = None) -> RunResult:
    if config.variant != "psro-rn":
        raise ConfigError("run_rectified needs variant psro-rn")
    return run(config, initial, game)


# -- run directory -------------------------------------------------------------------

def _member_ids(game: Any, population: Population) -> List[str]:
    if isinstance(game, GameTree):
        return [f"p{population.player}_{k:03d}" for k in range(len(population))]
    return [f"p{population.player}_points:{k}" for k in range(len(population))]


def save_run(run_dir: Path, game: Any, meta: MetaGame) -> None:
    """Populations and the meta-game (the loop's meta always matches its populations)."""
    policy_dir = run_dir / POLICY_DIR
    for pop in (meta.row, meta.col):
        if isinstance(game, GameTree):
            for member_id, policy in zip(_member_ids(game, pop), pop):
                save_policy(policy, policy_dir / f"{member_id}.txt")
        else:
            save_points(list(pop), policy_dir / f"p{pop.player}_points.txt")
    save_meta_game(meta, run_dir / META_FILE,
                   (_member_ids(game, meta.row), _member_ids(game, meta.col)))


@dataclass
class LoadedRun:
    run_dir: Path
    config: RunConfig
    game: Any
    populations: Tuple[Population, Population]
    logs: List[Dict[str, str]]
    # meta-NE saved with the final populations, when meta.txt matches them
    meta_ne: Optional[MetaNE] = None


def _load_population(game: Any, player: int, policy_dir: Path) -> Population:
    if isinstance(game, GameTree):
        files = sorted(policy_dir.glob(f"p{player}_[0-9][0-9][0-9].txt"))
        if not files:
            raise RunDirectoryError(f"{policy_dir}: no policies for player {player}")
        return Population(player, tuple(load_policy(game, player, f) for f in files))
    path = policy_dir / f"p{player}_points.txt"
    if not path.exists():
        raise RunDirectoryError(f"{path}: missing")
    return Population(player, tuple(load_points(player, path)))


def load_run(run_dir: Path) -> LoadedRun:
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise RunDirectoryError(f"{run_dir}: not a run directory")
    config_path = run_dir / CONFIG_FILE
    metrics_path = run_dir / METRICS_FILE
    for path in (config_path, metrics_path):
        if not path.exists():
            raise RunDirectoryError(f"{path}: missing")
    config = config_from_json(config_path)
    game = make_game(config.game)
    pops = (_load_population(game, 1, run_dir / POLICY_DIR),
            _load_population(game, 2, run_dir / POLICY_DIR))
    try:
        rows = read_rows(metrics_path)
    except (OSError, ValueError) as e:
        raise RunDirectoryError(f"{metrics_path}: {e}") from e
    return LoadedRun(run_dir, config, game, pops, rows, _saved_meta_ne(run_dir / META_FILE, pops))


def _saved_meta_ne(path: Path, pops: Tuple[Population, Population]) -> Optional[MetaNE]:
    ne = read_meta_ne(path) if path.exists() else None
    if ne is None:
        return None
    if (len(ne.row), len(ne.col)) != (len(pops[0]), len(pops[1])):
        log.warning("%s: meta-NE sizes %d x %d do not match the saved populations; ignoring it",
                    path, len(ne.row), len(ne.col))
        return None
    return ne


def _pop_size(row: Dict[str, str], key: str, limit: int, path_hint: str) -> int:
    try:
        size = int(row[key])
    except (KeyError, TypeError, ValueError):
        raise RunDirectoryError(f"{path_hint}: bad {key} value {row.get(key)!r}") from None
    if not 1 <= size <= limit:
        raise RunDirectoryError(f"{path_hint}: {key}={size} but only {limit} policies saved")
    return size


def evaluate_run(game: Any, logs: Sequence[Dict[str, str]], populations: Tuple[Population, Population],
                 eps: float = DEFAULT_PE_EPS, deterministic: bool = True) -> List[EvalReport]:
    """
    Recompute PE and meta-NE exploitability for the population prefix each
    metrics row describes.
    """
    reports: List[EvalReport] = []
    meta: Optional[MetaGame] = None
    for row in logs:
        started = time.perf_counter()
        n1 = _pop_size(row, "pop_size_p1", len(populations[0]), METRICS_FILE)
        n2 = _pop_size(row, "pop_size_p2", len(populations[1]), METRICS_FILE)
        p1, p2 = populations[0].prefix(n1), populations[1].prefix(n2)
        previous = meta if meta is not None and len(meta.row) <= n1 and len(meta.col) <= n2 else None
        meta = fill_payoff_matrix(game, p1, p2, previous=previous).solved()
        ne = meta.ne
        pi1 = realize(game, MixedPolicy(p1, ne.row))
        pi2 = realize(game, MixedPolicy(p2, ne.col))
        u = mixed_utility(game, pi1, pi2)
        br1 = best_response(game, pi2, 1)[1]
        br2 = best_response(game, pi1, 2)[1]
        terms = pe_terms(game, p1, p2, eps)
        reports.append(EvalReport(
            iteration=int(row.get("iter", len(reports))),
            exploitability=0.5 * ((br1 - u) + (br2 + u)), pe=terms.pe,
            br_value_p1=br1, br_value_p2=br2, pop_size_p1=n1, pop_size_p2=n2,
            time_ms=None if deterministic else 1000.0 * (time.perf_counter() - started)))
    return reports


def write_eval(run_dir: Path, reports: Sequence[EvalReport]) -> Path:
    path = Path(run_dir) / EVAL_FILE
    if path.exists():
        path.unlink()
    ensure_csv(path, EVAL_HEADER)
    for report in reports:
        append_row(path, EVAL_HEADER, report.row())
    return path


def metrics_series(logs: Sequence[Dict[str, str]], key: str) -> List[Optional[float]]:
    return [parse_optional(row.get(key, "")) for row in logs]


# -- experiments -------------------------------------------------------------------

@dataclass(frozen=True)
class AblationRow:
    lam: float
    values: Tuple[float, ...]

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def stderr(self) -> float:
        if len(self.values) < 2:
            return 0.0
        return float(np.std(self.values, ddof=1) / np.sqrt(len(self.values)))

    def row(self) -> list:
        return [self.lam, len(self.values), self.mean, self.stderr]


def run_ablation(config: RunConfig, lambdas: Sequence[float], seeds: Sequence[int],
                 out: Optional[Path] = None) -> List[AblationRow]:
    """Final meta-NE exploitability x 100 of psd-psro for every (lambda, seed)."""
    game = make_game(config.game)
    rows = []
    for lam in lambdas:
        values = []
        for seed in seeds:
            cfg = replace(config, variant="psd-psro", seed=seed, out_dir=None, allow_zero_lambda=True,
                          oracle=replace(config.oracle, lam=float(lam), seed=seed))
            result = run(cfg, game=game)
            values.append(100.0 * result.final_exploitability())
            log.info("lambda=%g seed=%d exploitability x100=%.4f", lam, seed, values[-1])
        rows.append(AblationRow(float(lam), tuple(values)))
    if out is not None:
        out = Path(out)
        if out.exists():
            out.unlink()
        for r in rows:
            append_row(out, ABLATION_HEADER, r.row())
    return rows


@dataclass(frozen=True)
class VersusResult:
    # from run A's point of view, averaged over both seatings
    payoff: float
    win: float
    draw: float
    loss: float


def versus(first: LoadedRun, second: LoadedRun) -> VersusResult:
    """Head-to-head of two runs' final meta-NE policies on the same tree game."""
    if not isinstance(first.game, GameTree):
        raise GameError("head-to-head play needs a tree game")
    if first.config.game != second.config.game:
        raise RunDirectoryError(f"{first.run_dir} and {second.run_dir} were run on different games")
    game = first.game

    def final_policies(loaded: LoadedRun) -> Tuple[BehavioralPolicy, BehavioralPolicy]:
        p1, p2 = loaded.populations
        ne = loaded.meta_ne
        if ne is None:
            ne = fill_payoff_matrix(game, p1, p2).solved().ne
        return realize(game, MixedPolicy(p1, ne.row)), realize(game, MixedPolicy(p2, ne.col))

    a1, a2 = final_policies(first)
    b1, b2 = final_policies(second)
    w1, d1, l1 = outcome_probabilities(game, a1, b2)
    w2, d2, l2 = outcome_probabilities(game, b1, a2)
    payoff = 0.5 * (mixed_utility(game, a1, b2) - mixed_utility(game, b1, a2))
    return VersusResult(payoff, 0.5 * (w1 + l2), 0.5 * (d1 + d2), 0.5 * (l1 + w2))
