"""
Exact evaluation: best responses, exploitability, population exploitability
and gamescape geometry. Tree games and functional games share the same entry
points; functional best responses are continuous optimizations.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, List, Optional, Tuple

import numpy as np
from scipy import optimize

from .errors import PsdPsroError
from .functional import FunctionalGame2D, PointPolicy, functional_best_response
from .games import GameTree, PlayerIndex
from .meta_solver import MetaGame, solve_zero_sum_ne, utility
from .policy import (BehavioralPolicy, MixedPolicy, Population, mixture_sequence_form,
                     mixture_to_behavioral, to_sequence_form)

log = logging.getLogger(__name__)

TIE_TOL = 1e-12
DEFAULT_PE_EPS = 1e-6
MAX_DO_ROUNDS = 500
FUNCTIONAL_DO_ROUNDS = 50
KKT_TOL = 1e-6
MEMBERSHIP_TOL = 1e-10


@dataclass(frozen=True)
class EvalReport:
    iteration: int
    exploitability: Optional[float]
    pe: Optional[float]
    br_value_p1: Optional[float]
    br_value_p2: Optional[float]
    pop_size_p1: int
    pop_size_p2: int
    time_ms: Optional[float] = None

    def row(self) -> list:
        return [self.iteration, self.exploitability, self.pe, self.br_value_p1, self.br_value_p2,
                self.pop_size_p1, self.pop_size_p2, self.time_ms]


# -- best response ---------------------------------------------------------------

def _opponent_sequences(game: GameTree, opponent) -> np.ndarray:
    if isinstance(opponent, MixedPolicy):
        return mixture_sequence_form(game, opponent).values
    return to_sequence_form(game, opponent).values


def _segment_starts(index: PlayerIndex, states: np.ndarray) -> np.ndarray:
    sizes = index.sizes[states]
    return np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)


def backup_max(index: PlayerIndex, direct: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Deepest states first: Q(s, a) = direct(s, a) + sum of child state values,
    V(s) = max_a Q(s, a). Returns (root value, chosen action per state) with
    ties broken towards the lowest action index.
    """
    child = np.zeros(index.n_sequences)
    choice = np.zeros(len(index), dtype=np.int64)
    for seqs, states in zip(reversed(index.levels), reversed(index.state_levels)):
        q = direct[seqs] + child[seqs]
        starts = _segment_starts(index, states)
        v = np.maximum.reduceat(q, starts)
        sizes = index.sizes[states]
        pos = np.arange(len(q))
        best = np.where(q >= np.repeat(v, sizes) - TIE_TOL, pos, len(q))
        choice[states] = np.minimum.reduceat(best, starts) - starts
        np.add.at(child, index.state_parent[states], v)
    return float(direct[0] + child[0]), choice


def best_response(game: Any, opponent, player: int):
    """
    Exact best response of `player` to a policy or mixture of the other player.
    Returns (policy, value) with value = u_player(BR, opponent).
    """
    if isinstance(game, FunctionalGame2D):
        points, weights = _points_and_weights(opponent)
        xy, value = functional_best_response(game, points, weights)
        return PointPolicy(player, xy), value

    opp = 3 - player
    if getattr(opponent, "player", opp) != opp:
        raise PsdPsroError(f"best response of player {player} needs a player-{opp} opponent")
    index = game.index(player)
    x_opp = _opponent_sequences(game, opponent)
    direct = game.sequence_payoffs(player, x_opp)
    value, choice = backup_max(index, direct)
    probs = np.zeros(index.n_sequences)
    probs[0] = 1.0
    probs[index.offsets + choice] = 1.0
    return BehavioralPolicy(player, index, probs), value


def _points_and_weights(opponent) -> Tuple[List[np.ndarray], np.ndarray]:
    if isinstance(opponent, MixedPolicy):
        return [m.xy for m in opponent.population], np.asarray(opponent.weights)
    return [opponent.xy], np.ones(1)


def best_response_value(game: Any, opponent, player: int) -> float:
    return best_response(game, opponent, player)[1]


# -- exploitability ------------------------------------------------------------

def mixed_utility(game: Any, first, second) -> float:
    """u_1 where either side may be a single policy or a MixedPolicy."""
    if isinstance(game, GameTree):
        x1 = _opponent_sequences(game, first)
        x2 = _opponent_sequences(game, second)
        return game.utility_from_sequences(x1, x2)
    a = first if isinstance(first, MixedPolicy) else MixedPolicy(Population(first.player, (first,)), [1.0])
    b = second if isinstance(second, MixedPolicy) else MixedPolicy(Population(second.player, (second,)), [1.0])
    return float(sum(wa * wb * utility(game, pa, pb)
                     for wa, pa in zip(a.weights, a.population) if wa > 0
                     for wb, pb in zip(b.weights, b.population) if wb > 0))


def exploitability(game: Any, pi1, pi2) -> float:
    """1/2 * sum_i [max u_i(., pi_-i) - u_i(pi_i, pi_-i)]; either side may be a mixture."""
    u = mixed_utility(game, pi1, pi2)
    br1 = best_response_value(game, pi2, 1)
    br2 = best_response_value(game, pi1, 2)
    return 0.5 * ((br1 - u) + (br2 + u))


def relative_population_performance(meta: MetaGame) -> float:
    """Meta-game value for the row population at a meta-NE."""
    return meta.solved().ne.value


# -- population exploitability -------------------------------------------------

@dataclass(frozen=True)
class PopulationExploitability:
    pe: float
    # P_1(Omega_1, Pi_2): best any player-1 strategy guarantees against Pi_2's hull
    unrestricted_p1: float
    # P_1(Pi_1, Omega_2): player 1's guarantee from Pi_1's hull against anything
    restricted_p1: float
    mixture_p1: np.ndarray
    mixture_p2: np.ndarray
    rounds: Tuple[int, int]


def _unrestricted_value(game: Any, player: int, restricted: Population,
                        eps: float, max_rounds: int = MAX_DO_ROUNDS) -> Tuple[float, np.ndarray, int]:
    """
    min over the restricted side's hull of `player`'s best-response value,
    by double oracle on (best responses found so far) x restricted.
    Returns the certified upper bound, the restricted side's mixture and
    the number of rounds.
    """
    sign = 1.0 if player == 1 else -1.0
    nu = np.full(len(restricted), 1.0 / len(restricted))
    br, _ = best_response(game, MixedPolicy(restricted, nu), player)
    rows = [[sign * _u(game, player, br, r) for r in restricted]]
    for rounds in range(1, max_rounds + 1):
        m = np.array(rows)
        _, nu, value = solve_zero_sum_ne(m)
        br, br_value = best_response(game, MixedPolicy(restricted, nu), player)
        if br_value - value <= eps:
            return br_value, nu, rounds
        rows.append([sign * _u(game, player, br, r) for r in restricted])
    log.warning("inner double oracle stopped after %d rounds without reaching eps=%g",
                max_rounds, eps)
    return br_value, nu, max_rounds


def _u(game: Any, player: int, mine, theirs) -> float:
    return utility(game, mine, theirs) if player == 1 else utility(game, theirs, mine)


def pe_terms(game: Any, pop1: Population, pop2: Population,
             eps: float = DEFAULT_PE_EPS) -> PopulationExploitability:
    if eps <= 0:
        raise PsdPsroError("population exploitability needs eps > 0")
    # continuous best responses are approximate; cap their rounds lower
    rounds = MAX_DO_ROUNDS if isinstance(game, GameTree) else FUNCTIONAL_DO_ROUNDS
    v1, nu2, r1 = _unrestricted_value(game, 1, pop2, eps, rounds)
    v2, nu1, r2 = _unrestricted_value(game, 2, pop1, eps, rounds)
    return PopulationExploitability(
        pe=0.5 * (v1 + v2), unrestricted_p1=v1, restricted_p1=-v2,
        mixture_p1=nu1, mixture_p2=nu2, rounds=(r1, r2))


def population_exploitability(game: Any, pop1: Population, pop2: Population,
                              eps: float = DEFAULT_PE_EPS) -> float:
    """
    PE = 1/2 (P_1(Omega_1, Pi_2) - P_1(Pi_1, Omega_2)), each term within eps.
    The returned value is the exploitability of the joint hull mixture found.
    """
    return pe_terms(game, pop1, pop2, eps).pe


# -- gamescape -------------------------------------------------------------------

@dataclass(frozen=True)
class HullProjection:
    distance: float
    weights: np.ndarray
    # Frank-Wolfe gap of 1/2 |M^T b - m|^2 at the returned weights
    gap: float


def _project_simplex(v: np.ndarray) -> np.ndarray:
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, len(v) + 1)
    rho = np.nonzero(u * k > css - 1.0)[0][-1]
    theta = (css[rho] - 1.0) / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def _fw_gap(m: np.ndarray, target: np.ndarray, beta: np.ndarray) -> float:
    g = m @ (m.T @ beta - target)
    return float(g @ beta - g.min())


def gamescape_projection(m: np.ndarray, target: np.ndarray) -> HullProjection:
    m = np.asarray(m, dtype=float)
    target = np.asarray(target, dtype=float)
    if m.ndim != 2 or target.shape != (m.shape[1],):
        raise PsdPsroError(f"payoff vector of length {target.size} does not match "
                           f"{m.shape[1] if m.ndim == 2 else '?'} columns")
    n = m.shape[0]
    # exact membership first: nonnegative least squares with the simplex row appended
    w, norm = optimize.nnls(np.vstack([m.T, np.ones((1, n))]), np.append(target, 1.0))
    if norm <= MEMBERSHIP_TOL and w.sum() > 0:
        beta = w / w.sum()
        r = m.T @ beta - target
        return HullProjection(float(np.sqrt(r @ r)), beta, _fw_gap(m, target, beta))

    gram = m @ m.T
    lin = m @ target

    def fun(b):
        r = m.T @ b - target
        return 0.5 * float(r @ r), gram @ b - lin

    res = optimize.minimize(fun, np.full(n, 1.0 / n), jac=True, method="SLSQP",
                            bounds=[(0.0, 1.0)] * n,
                            constraints=[{"type": "eq", "fun": lambda b: b.sum() - 1.0,
                                          "jac": lambda b: np.ones_like(b)}],
                            options={"ftol": 1e-16, "maxiter": 1000})
    beta = _project_simplex(np.asarray(res.x, dtype=float))
    gap = _fw_gap(m, target, beta)
    if gap > KKT_TOL:
        # projected gradient polish
        step = 1.0 / max(float(np.linalg.eigvalsh(gram).max()), 1e-12)
        for _ in range(100_000):
            beta = _project_simplex(beta - step * (gram @ beta - lin))
            gap = _fw_gap(m, target, beta)
            if gap <= KKT_TOL * 1e-2:
                break
        if gap > KKT_TOL:
            log.warning("gamescape projection certificate %.3e above %.1e", gap, KKT_TOL)
    r = m.T @ beta - target
    return HullProjection(float(np.sqrt(r @ r)), beta, gap)


def gamescape_distance(m: np.ndarray, target: np.ndarray) -> float:
    """Euclidean distance from `target` to the convex hull of the rows of m."""
    return gamescape_projection(m, target).distance


# -- head to head ------------------------------------------------------------------

def outcome_probabilities(game: GameTree, pi1: BehavioralPolicy,
                          pi2: BehavioralPolicy) -> Tuple[float, float, float]:
    """(P[u_1 > 0], P[u_1 = 0], P[u_1 < 0]) over terminal histories."""
    x1 = to_sequence_form(game, pi1).values
    x2 = to_sequence_form(game, pi2).values
    w = game.term_chance * x1[game.term_seq[1]] * x2[game.term_seq[2]]
    u = game.term_payoff
    return float(w[u > 0].sum()), float(w[u == 0].sum()), float(w[u < 0].sum())


def realize(game: Any, mixture: MixedPolicy):
    """Single policy equivalent to the mixture, where one exists (tree games)."""
    if isinstance(game, GameTree):
        return mixture_to_behavioral(game, mixture)
    return mixture
