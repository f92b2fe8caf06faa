import argparse
import logging
import sys
import traceback
from pathlib import Path

import numpy as np

from .psd_psro.config import (DISTANCE_MODES, GAMES, LAMBDA_DEFAULTS, ORACLE_MODES, PRIZE_ORDERS,
                              TREE_GAMES, VARIANTS, load_config)
from .psd_psro.counterexample import reproduce
from .psd_psro.diversity import psd_distance_exact, psd_distance_sampled, weighting_opponent
from .psd_psro.errors import ConfigError, PsdPsroError
from .psd_psro.evaluation import population_exploitability
from .psd_psro.games import BUILDERS
from .psd_psro.policy import BehavioralPolicy, load_policy
from .psd_psro.psro import (evaluate_run, load_run, make_game, run, run_ablation, versus,
                            write_eval)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_MISMATCH = 3

# flag dest -> dotted config key
RUN_FLAGS = {
    "game": "game.name",
    "variant": "variant",
    "lam": "oracle.lam",
    "iters": "iterations",
    "seed": "seed",
    "out": "out_dir",
    "oracle_mode": "oracle.mode",
    "lr": "oracle.learning_rate",
    "steps": "oracle.steps",
    "episodes": "oracle.episodes",
    "gamma": "oracle.gamma",
    "support_floor": "oracle.support_floor",
    "no_baseline": "oracle.baseline",
    "separate_rollouts": "oracle.share_rollouts",
    "distance_mode": "oracle.distance.mode",
    "samples": "oracle.distance.samples",
    "hull_samples": "oracle.distance.hull_samples",
    "blend": "oracle.distance.blend",
    "no_exploitability": "metrics.exploitability",
    "no_pe": "metrics.pe",
    "pe_every": "metrics.pe_every",
    "pe_eps": "metrics.pe_eps",
    "no_diversity": "metrics.diversity",
    "workers": "workers",
    "parallel": "deterministic",
    "allow_zero_lambda": "allow_zero_lambda",
    "goofspiel_cards": "game.goofspiel_cards",
    "prize_order": "game.prize_order",
    "score_difference": "game.score_difference",
    "matrix_file": "game.matrix_path",
    "hump_radius": "game.hump_radius",
    "hump_scale": "game.hump_scale",
}

_console = None


class CliParser(argparse.ArgumentParser):
    """Usage errors exit with status 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def setup_crash_logging():
    log_dir = Path(__file__).resolve().parent.parent / "logs"
    log_dir.mkdir(exist_ok=True)
    log_file = log_dir / "crash.log"

    handler = logging.FileHandler(str(log_file))
    handler.setLevel(logging.ERROR)
    handler.setFormatter(logging.Formatter('%(asctime)s %(levelname)s: %(message)s'))
    logging.getLogger().addHandler(handler)
    return log_file


def setup_console_logging(debug=False):
    global _console
    root = logging.getLogger()
    if _console is None:
        _console = logging.StreamHandler(sys.stderr)
        _console.setFormatter(logging.Formatter('%(levelname)s %(name)s: %(message)s'))
        root.addHandler(_console)
    level = logging.DEBUG if debug else logging.INFO
    _console.setLevel(level)
    root.setLevel(level)


def log_crash(e):
    logging.error("Uncaught exception:", exc_info=e)
    # Also print to stderr
    print(f"CRITICAL ERROR: {e}", file=sys.stderr)
    traceback.print_exc()


# -- flags -------------------------------------------------------------------------

def add_game_flags(p):
    p.add_argument("--config", type=Path, help="YAML or JSON config layered over config.yaml.")
    p.add_argument("--game", choices=GAMES)
    p.add_argument("--goofspiel-cards", type=int)
    p.add_argument("--prize-order", choices=PRIZE_ORDERS)
    p.add_argument("--score-difference", action="store_const", const=True,
                   help="Goofspiel payoff is the score difference instead of win/loss.")
    p.add_argument("--matrix-file", help="Payoff matrix file for --game matrix.")
    p.add_argument("--hump-radius", type=float)
    p.add_argument("--hump-scale", type=float)


def add_run_flags(p):
    add_game_flags(p)
    p.add_argument("--variant", choices=VARIANTS)
    p.add_argument("--lambda", dest="lam", type=float, help="Diversity weight (per-game default).")
    p.add_argument("--iters", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--oracle-mode", choices=ORACLE_MODES)
    p.add_argument("--lr", type=float, help="Oracle learning rate.")
    p.add_argument("--steps", type=int, help="Oracle ascent steps.")
    p.add_argument("--episodes", type=int, help="REINFORCE episodes per update.")
    p.add_argument("--gamma", type=float)
    p.add_argument("--support-floor", type=float)
    p.add_argument("--no-baseline", action="store_const", const=False)
    p.add_argument("--separate-rollouts", action="store_const", const=False,
                   help="Roll out the KL terms against the weighting opponent.")
    p.add_argument("--distance-mode", choices=DISTANCE_MODES)
    p.add_argument("--samples", type=int, help="Episodes per sampled distance.")
    p.add_argument("--hull-samples", type=int)
    p.add_argument("--blend", type=float, help="Uniform share of the weighting opponent.")
    p.add_argument("--no-exploitability", action="store_const", const=False)
    p.add_argument("--no-pe", action="store_const", const=False)
    p.add_argument("--pe-every", type=int)
    p.add_argument("--pe-eps", type=float)
    p.add_argument("--no-diversity", action="store_const", const=False)
    p.add_argument("--workers", type=int)
    p.add_argument("--parallel", action="store_const", const=False,
                   help="Allow threads (time_ms is recorded, runs are not byte-reproducible).")
    p.add_argument("--allow-zero-lambda", action="store_const", const=True)


def overrides_from(args) -> dict:
    values = vars(args)
    return {key: values[dest] for dest, key in RUN_FLAGS.items()
            if dest in values and values[dest] is not None}


def parse_list(text, cast):
    try:
        return [cast(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse list {text!r}") from None


def build_parser():
    p = CliParser(prog="psd-psro", description="Policy-space diversity PSRO for two-player zero-sum games")
    p.add_argument("--debug", action="store_true", help="Enable debug logging.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=CliParser)

    r = sub.add_parser("run", help="Run PSRO / PSRO-rN / PSD-PSRO and persist the run directory.")
    add_run_flags(r)
    r.add_argument("--out", help="Run directory.")
    r.set_defaults(handler=cmd_run)

    e = sub.add_parser("eval", help="Recompute exploitability and PE for a run directory.")
    e.add_argument("run_dir", type=Path)
    e.add_argument("--pe-eps", type=float)
    e.set_defaults(handler=cmd_eval)

    c = sub.add_parser("counterexample", help="Gamescape enlargement vs population exploitability.")
    c.set_defaults(handler=cmd_counterexample)

    g = sub.add_parser("games", help="List the available games.")
    g.set_defaults(handler=cmd_games)

    d = sub.add_parser("distance", help="PSD distance between two saved policies.")
    add_game_flags(d)
    d.add_argument("policy", type=Path)
    d.add_argument("other", type=Path)
    d.add_argument("--player", type=int, choices=(1, 2), default=1)
    d.add_argument("--weighting", type=Path, help="Opponent policy file (default uniform).")
    d.add_argument("--blend", type=float)
    d.add_argument("--distance-mode", choices=DISTANCE_MODES)
    d.add_argument("--samples", type=int)
    d.add_argument("--seed", type=int)
    d.set_defaults(handler=cmd_distance)

    a = sub.add_parser("ablation", help="Diversity-weight sweep over seeds, written to CSV.")
    add_run_flags(a)
    a.add_argument("--lambdas", default="0,1,2,3,5")
    a.add_argument("--seeds", default="0,1,2,3,4")
    a.add_argument("--out", type=Path, default=Path("ablation.csv"))
    a.set_defaults(handler=cmd_ablation, game="mixture7")

    v = sub.add_parser("versus", help="Head-to-head of two runs' final meta-NE policies.")
    v.add_argument("run_a", type=Path)
    v.add_argument("run_b", type=Path)
    v.set_defaults(handler=cmd_versus)
    return p


# -- subcommands -------------------------------------------------------------------

def fmt(value):
    return "-" if value is None else f"{value:.6g}"


def cmd_run(args):
    cfg = load_config(args.config, overrides_from(args))
    result = run(cfg)
    print(f"{cfg.variant} on {cfg.game.name}: {cfg.iterations} iterations, "
          f"populations {len(result.populations[0])}/{len(result.populations[1])}")
    print(f"final meta-NE exploitability: {fmt(result.final_exploitability())}")
    if cfg.pe:
        pe = population_exploitability(result.game, *result.populations, eps=cfg.pe_eps)
        print(f"final population exploitability: {fmt(pe)}")
    if result.run_dir is not None:
        print(f"run directory: {result.run_dir}")
    return EXIT_OK


def cmd_eval(args):
    loaded = load_run(args.run_dir)
    eps = args.pe_eps if args.pe_eps is not None else loaded.config.pe_eps
    if eps <= 0:
        raise ConfigError("--pe-eps must be > 0")
    reports = evaluate_run(loaded.game, loaded.logs, loaded.populations, eps,
                           deterministic=loaded.config.deterministic)
    path = write_eval(loaded.run_dir, reports)
    if reports:
        last = reports[-1]
        print(f"iteration {last.iteration}: exploitability {fmt(last.exploitability)}, PE {fmt(last.pe)}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_counterexample(args):
    reports = reproduce()
    for report in reports:
        print("\n".join(report.lines()))
    return EXIT_OK if all(r.reproduced for r in reports) else EXIT_MISMATCH


def cmd_games(args):
    for name, text in BUILDERS.items():
        print(f"{name:10s} lambda={LAMBDA_DEFAULTS.get(name, 0.0):<5g} {text}")
    return EXIT_OK


def cmd_distance(args):
    overrides = {key: value for key, value in {
        "game.name": args.game, "game.goofspiel_cards": args.goofspiel_cards,
        "game.prize_order": args.prize_order, "game.score_difference": args.score_difference,
        "game.matrix_path": args.matrix_file, "oracle.distance.mode": args.distance_mode,
        "oracle.distance.samples": args.samples, "oracle.distance.blend": args.blend,
        "seed": args.seed}.items() if value is not None}
    cfg = load_config(args.config, overrides)
    if cfg.game.name not in TREE_GAMES:
        raise ConfigError("distance needs a tree game")
    game = make_game(cfg.game)
    player = args.player
    pi = load_policy(game, player, args.policy)
    other = load_policy(game, player, args.other)
    opponent = (load_policy(game, 3 - player, args.weighting) if args.weighting is not None
                else BehavioralPolicy.uniform(game, 3 - player))
    b = weighting_opponent(game, opponent, cfg.oracle.distance.blend)
    if cfg.oracle.distance.mode == "sampled":
        est = psd_distance_sampled(game, pi, other, b, cfg.oracle.distance.samples,
                                   np.random.default_rng(cfg.seed))
        print(f"distance {est.value!r} stderr {est.stderr!r} samples {est.samples}")
    else:
        print(f"distance {psd_distance_exact(game, pi, other, b)!r}")
    return EXIT_OK


def cmd_ablation(args):
    overrides = overrides_from(args)
    overrides["variant"] = "psd-psro"
    overrides["allow_zero_lambda"] = True
    cfg = load_config(args.config, overrides)
    rows = run_ablation(cfg, parse_list(args.lambdas, float), parse_list(args.seeds, int), args.out)
    for r in rows:
        print(f"lambda={r.lam:g}: exploitability x100 = {r.mean:.3f} +/- {r.stderr:.3f}")
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_versus(args):
    result = versus(load_run(args.run_a), load_run(args.run_b))
    print(f"{args.run_a} vs {args.run_b}: payoff {result.payoff:+.6f}, "
          f"win {result.win:.4f}, draw {result.draw:.4f}, loss {result.loss:.4f}")
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    setup_console_logging(args.debug)
    try:
        return args.handler(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except PsdPsroError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    crash_log = setup_crash_logging()

    try:
        sys.exit(main())
    except Exception as e:
        print(f"\nRun crashed! Details logged to: {crash_log}", file=sys.stderr)
        log_crash(e)
        sys.exit(EXIT_RUNTIME)
