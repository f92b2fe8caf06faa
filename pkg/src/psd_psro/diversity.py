"""
Policy-space distance between behavioral policies and the payoff-space
diversity diagnostics.

The distance from pi to pi' is the reach-weighted average KL divergence

    D(pi, pi') = sum_s w(s) KL(pi(s) || pi'(s)) / sum_s w(s)

over the owner's information states, with w(s) the owner's own reach of s
under pi times the chance-and-opponent reach of s under a full-support
weighting opponent b. KL is in nats.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import rel_entr

from .config import DistanceConfig
from .errors import InfiniteDistanceError, PolicyError
from .functional import FunctionalGame2D, hull_point, point_distance
from .games import GameTree, PlayerIndex
from .meta_solver import MetaGame, solve_zero_sum_ne
from .policy import (BehavioralPolicy, MixedPolicy, Population, blend_uniform,
                     episode_sampler, mixture_to_behavioral, sample_hull, to_sequence_form)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DistanceEstimate:
    value: float
    stderr: float
    samples: int


def check_weighting(weighting: BehavioralPolicy) -> BehavioralPolicy:
    if np.any(weighting.probs[1:] <= 0):
        raise PolicyError(f"weighting opponent of player {weighting.player} needs full support")
    return weighting


def weighting_opponent(game: GameTree, opponent, blend: float) -> BehavioralPolicy:
    """b = (1 - blend) * opponent + blend * uniform, state by state."""
    policy = mixture_to_behavioral(game, opponent) if isinstance(opponent, MixedPolicy) else opponent
    return blend_uniform(game, policy, blend)


def floor_support(policy: BehavioralPolicy, floor: float) -> BehavioralPolicy:
    """Raise every probability to at least `floor` and renormalize each state."""
    if floor <= 0:
        return policy
    index = policy.index
    p = np.maximum(policy.probs, floor)
    p[0] = 1.0
    if len(index):
        sums = np.add.reduceat(p[1:], index.offsets - 1)
        p[1:] /= np.repeat(sums, index.sizes)
    return BehavioralPolicy(policy.player, index, p)


def state_kl(index: PlayerIndex, pi: BehavioralPolicy, pi_prime: BehavioralPolicy) -> np.ndarray:
    """KL(pi(s) || pi'(s)) per state; inf where pi' misses an action pi plays."""
    if not len(index):
        return np.zeros(0)
    terms = rel_entr(pi.probs[1:], pi_prime.probs[1:])
    return np.add.reduceat(terms, index.offsets - 1)


def state_weights(game: GameTree, pi: BehavioralPolicy, weighting: BehavioralPolicy) -> np.ndarray:
    """Own reach under pi times chance-and-opponent reach under the weighting opponent."""
    index = game.index(pi.player)
    x = to_sequence_form(game, pi).values
    x_b = to_sequence_form(game, weighting).values
    return x[index.state_parent] * game.external_reach(pi.player, x_b)


def _raise_infinite(index: PlayerIndex, pi, pi_prime, state: int):
    s = index.states[state]
    bad = np.flatnonzero((pi.probs[s.block] > 0) & (pi_prime.probs[s.block] <= 0))
    action = s.actions[int(bad[0])] if len(bad) else "?"
    raise InfiniteDistanceError(s.id, action)


def _check_pair(game: GameTree, pi: BehavioralPolicy, pi_prime: BehavioralPolicy,
                weighting: BehavioralPolicy) -> PlayerIndex:
    if pi.player != pi_prime.player:
        raise PolicyError("distance needs two policies of the same player")
    if weighting.player != 3 - pi.player:
        raise PolicyError("weighting opponent must belong to the other player")
    check_weighting(weighting)
    return game.index(pi.player)


def psd_distance_exact(game: GameTree, pi: BehavioralPolicy, pi_prime: BehavioralPolicy,
                       weighting: BehavioralPolicy) -> float:
    index = _check_pair(game, pi, pi_prime, weighting)
    w = state_weights(game, pi, weighting)
    total = float(w.sum())
    if total <= 0:
        return 0.0
    kl = state_kl(index, pi, pi_prime)
    live = w > 0
    infinite = np.flatnonzero(live & ~np.isfinite(kl))
    if len(infinite):
        _raise_infinite(index, pi, pi_prime, int(infinite[0]))
    return float(np.dot(w[live], kl[live]) / total)


def psd_distance_sampled(game: GameTree, pi: BehavioralPolicy, pi_prime: BehavioralPolicy,
                         weighting: BehavioralPolicy, samples: int,
                         rng: np.random.Generator) -> DistanceEstimate:
    """
    Ratio estimator over `samples` episodes of pi against the weighting
    opponent: summed KL at visited own states over the number of visits.
    The standard error is the delta-method one.
    """
    if samples < 1:
        raise PolicyError("sample count must be >= 1")
    index = _check_pair(game, pi, pi_prime, weighting)
    kl = state_kl(index, pi, pi_prime)
    player = pi.player
    episodes = episode_sampler(game).sample({player: pi, 3 - player: weighting}, rng, samples)

    y = np.zeros(samples)
    c = np.zeros(samples)
    for k, ep in enumerate(episodes):
        visits = ep.visits[player]
        for s, _ in visits:
            if not np.isfinite(kl[s]):
                _raise_infinite(index, pi, pi_prime, s)
            y[k] += kl[s]
        c[k] = len(visits)
    if c.sum() == 0:
        return DistanceEstimate(0.0, 0.0, samples)
    ratio = float(y.sum() / c.sum())
    stderr = 0.0
    if samples > 1:
        resid = y - ratio * c
        stderr = float(np.sqrt(np.var(resid, ddof=1) / samples) / c.mean())
    return DistanceEstimate(ratio, stderr, samples)


def psd_distance(game: GameTree, pi: BehavioralPolicy, pi_prime: BehavioralPolicy,
                 weighting: BehavioralPolicy, cfg: DistanceConfig,
                 rng: Optional[np.random.Generator] = None) -> float:
    if cfg.mode == "sampled":
        rng = rng if rng is not None else np.random.default_rng(0)
        return psd_distance_sampled(game, pi, pi_prime, weighting, cfg.samples, rng).value
    return psd_distance_exact(game, pi, pi_prime, weighting)


def hull_policies(game: GameTree, samples: Sequence[MixedPolicy],
                  support_floor: float = 0.0) -> List[BehavioralPolicy]:
    return [floor_support(mixture_to_behavioral(game, mu), support_floor) for mu in samples]


def min_hull_distance(game: Any, pi, population: Population, weighting: Optional[BehavioralPolicy],
                      cfg: DistanceConfig, rng: np.random.Generator,
                      support_floor: float = 0.0) -> Tuple[float, MixedPolicy]:
    """
    Smallest distance from pi to K = max(|population|, cfg.hull_samples)
    sampled hull points, vertices included. Samples at infinite distance are
    skipped; if all of them are infinite the first error is raised.
    """
    samples = sample_hull(population, max(len(population), cfg.hull_samples), rng)
    if isinstance(game, FunctionalGame2D):
        points = [m.xy for m in population]
        values = [point_distance(game, pi.xy, hull_point(game, points, mu.weights))[0]
                  for mu in samples]
        k = int(np.argmin(values))
        return float(values[k]), samples[k]

    best, best_mu, first_error = np.inf, None, None
    for mu, target in zip(samples, hull_policies(game, samples, support_floor)):
        try:
            d = psd_distance(game, pi, target, weighting, cfg, rng)
        except InfiniteDistanceError as e:
            first_error = first_error or e
            continue
        if d < best:
            best, best_mu = d, mu
    if best_mu is None:
        raise first_error
    return float(best), best_mu


# -- payoff-space diagnostics ------------------------------------------------------

def effective_diversity(meta: Union[MetaGame, np.ndarray]) -> float:
    """sigma_row^T max(M, 0) sigma_col at the meta-NE; accepts a MetaGame or a bare matrix."""
    if isinstance(meta, MetaGame):
        ne = meta.solved().ne
        m, row, col = meta.payoffs, ne.row, ne.col
    else:
        m = np.asarray(meta, dtype=float)
        row, col, _ = solve_zero_sum_ne(m)
    return float(row @ np.maximum(m, 0.0) @ col)


def expected_cardinality(meta: Union[MetaGame, np.ndarray]) -> float:
    """Tr(I - (L + I)^-1) with L = M M^T, via the eigenvalues of L."""
    m = np.asarray(meta.payoffs if isinstance(meta, MetaGame) else meta, dtype=float)
    eig = np.clip(np.linalg.eigvalsh(m @ m.T), 0.0, None)
    return float(np.sum(eig / (eig + 1.0)))
