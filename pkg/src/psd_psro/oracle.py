"""
Best-response oracles.

The diversity-regularized oracle maximizes

    J(pi) = u(pi, sigma_opp) + lam * min_k D(pi, h_k)

over tabular softmax policies, where h_1..h_K are hull samples of the
player's current population (drawn once per oracle run, floored to full
support) and D is the reach-weighted KL distance of the diversity module.
The gradient is taken at the current argmin sample.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Callable, List, Optional, Sequence, Tuple

import numpy as np

from .config import OracleConfig
from .diversity import hull_policies, state_kl, weighting_opponent
from .errors import InfiniteDistanceError, OracleDivergenceError, PolicyError
from .evaluation import best_response
from .functional import (FunctionalGame2D, PointPolicy, hull_point, payoff_gradient,
                         point_distance, project_to_domain)
from .games import GameTree, PlayerIndex
from .policy import (BehavioralPolicy, MixedPolicy, Population, episode_sampler,
                     mixture_sequence_form, mixture_to_behavioral, sample_hull, to_sequence_form)

log = logging.getLogger(__name__)

GRAD_TOL = 1e-8
MAX_HALVINGS = 20
LOGIT_FLOOR = 1e-9


# -- parameterization -------------------------------------------------------------

def segment_softmax(index: PlayerIndex, logits: np.ndarray) -> np.ndarray:
    probs = np.ones(index.n_sequences)
    if not len(index):
        return probs
    z = logits[1:]
    starts = index.offsets - 1
    z = z - np.repeat(np.maximum.reduceat(z, starts), index.sizes)
    e = np.exp(z)
    probs[1:] = e / np.repeat(np.add.reduceat(e, starts), index.sizes)
    return probs


def softmax_chain(index: PlayerIndex, probs: np.ndarray, grad_probs: np.ndarray) -> np.ndarray:
    """d/d logits from d/d probs, state by state: pi * (g - <pi, g>)."""
    out = np.zeros(index.n_sequences)
    if len(index):
        inner = np.add.reduceat(probs[1:] * grad_probs[1:], index.offsets - 1)
        out[1:] = probs[1:] * (grad_probs[1:] - np.repeat(inner, index.sizes))
    return out


@dataclass(frozen=True, eq=False)
class PolicyParams:
    """Per-state logits in the owner's sequence layout; logits[0] is unused."""
    player: int
    index: PlayerIndex
    logits: np.ndarray

    def __post_init__(self):
        z = np.array(self.logits, dtype=float)
        if z.shape != (self.index.n_sequences,):
            raise PolicyError("logit vector does not match the player's sequences")
        if not np.all(np.isfinite(z)):
            raise OracleDivergenceError("policy logits became non-finite")
        z[0] = 0.0
        z.setflags(write=False)
        object.__setattr__(self, "logits", z)

    @classmethod
    def uniform(cls, game: GameTree, player: int) -> "PolicyParams":
        index = game.index(player)
        return cls(player, index, np.zeros(index.n_sequences))

    @classmethod
    def from_policy(cls, policy: BehavioralPolicy, floor: float = LOGIT_FLOOR) -> "PolicyParams":
        return cls(policy.player, policy.index, np.log(np.maximum(policy.probs, floor)))

    def policy(self) -> BehavioralPolicy:
        return BehavioralPolicy(self.player, self.index, segment_softmax(self.index, self.logits))

    def step(self, direction: np.ndarray, lr: float) -> "PolicyParams":
        return PolicyParams(self.player, self.index, self.logits + lr * direction)


# -- exact objective and gradient ----------------------------------------------------

def expectation_backup(index: PlayerIndex, probs: np.ndarray, seq_direct: np.ndarray,
                       state_direct: Optional[np.ndarray] = None) -> Tuple[float, np.ndarray]:
    """
    V(s) = state_direct(s) + sum_a pi(a|s) Q(s, a),
    Q(s, a) = seq_direct(s, a) + sum of V over child states of (s, a).
    Returns (value at the empty sequence, Q).
    """
    child = np.zeros(index.n_sequences)
    q_all = np.zeros(index.n_sequences)
    for seqs, states in zip(reversed(index.levels), reversed(index.state_levels)):
        q = seq_direct[seqs] + child[seqs]
        q_all[seqs] = q
        starts = np.concatenate([[0], np.cumsum(index.sizes[states])[:-1]]).astype(np.int64)
        v = np.add.reduceat(probs[seqs] * q, starts)
        if state_direct is not None:
            v = v + state_direct[states]
        np.add.at(child, index.state_parent[states], v)
    return float(seq_direct[0] + child[0]), q_all


def backup_gradient(index: PlayerIndex, x: np.ndarray, probs: np.ndarray, seq_direct: np.ndarray,
                    state_direct: Optional[np.ndarray] = None,
                    state_direct_grad: Optional[np.ndarray] = None) -> Tuple[float, np.ndarray]:
    """
    Value and gradient in pi of the backed-up quantity: d/d pi(a|s) =
    x(parent(s)) * (d state_direct(s) / d pi(a|s) + Q(s, a)).
    """
    value, q = expectation_backup(index, probs, seq_direct, state_direct)
    local = q if state_direct_grad is None else q + state_direct_grad
    grad = np.zeros(index.n_sequences)
    grad[1:] = x[index.seq_parent[1:]] * local[1:]
    return value, grad


@dataclass(frozen=True)
class ObjectiveParts:
    objective: float
    utility: float
    distance: float
    argmin: int


class OracleObjective:
    """J(pi) for one player against a fixed opponent and a fixed set of hull targets."""

    def __init__(self, game: GameTree, player: int, opponent, lam: float,
                 targets: Sequence[BehavioralPolicy] = (), weighting: Optional[BehavioralPolicy] = None):
        self.game = game
        self.player = player
        self.index = game.index(player)
        self.lam = float(lam)
        if isinstance(opponent, MixedPolicy):
            x_opp = mixture_sequence_form(game, opponent).values
        else:
            x_opp = to_sequence_form(game, opponent).values
        self.direct = game.sequence_payoffs(player, x_opp)
        self.targets = list(targets)
        self.rho = None
        if self.lam > 0:
            if not self.targets:
                raise PolicyError("a diversity-regularized objective needs hull targets")
            if weighting is None:
                raise PolicyError("a diversity-regularized objective needs a weighting opponent")
            x_b = to_sequence_form(game, weighting).values
            self.rho = game.external_reach(player, x_b)

    def _distances(self, policy: BehavioralPolicy, x: np.ndarray) -> Tuple[np.ndarray, float]:
        w = x[self.index.state_parent] * self.rho
        total = float(w.sum())
        live = w > 0
        values = np.full(len(self.targets), np.inf)
        for k, target in enumerate(self.targets):
            kl = state_kl(self.index, policy, target)
            if np.all(np.isfinite(kl[live])):
                values[k] = float(np.dot(w[live], kl[live]) / total) if total > 0 else 0.0
        return values, total

    def evaluate(self, policy: BehavioralPolicy, argmin: Optional[int] = None) -> ObjectiveParts:
        x = to_sequence_form(self.game, policy).values
        util = float(np.dot(x, self.direct))
        if self.lam == 0:
            return ObjectiveParts(util, util, 0.0, 0)
        values, _ = self._distances(policy, x)
        k = int(np.argmin(values)) if argmin is None else argmin
        if not np.isfinite(values[k]):
            raise InfiniteDistanceError(*self._violation(policy, self.targets[k]))
        return ObjectiveParts(util + self.lam * values[k], util, float(values[k]), k)

    def _violation(self, policy: BehavioralPolicy, target: BehavioralPolicy) -> Tuple[str, str]:
        for s in self.index.states:
            bad = np.flatnonzero((policy.probs[s.block] > 0) & (target.probs[s.block] <= 0))
            if len(bad):
                return s.id, s.actions[int(bad[0])]
        return "?", "?"

    def gradient(self, policy: BehavioralPolicy,
                 argmin: Optional[int] = None) -> Tuple[ObjectiveParts, np.ndarray]:
        """Objective parts and the gradient in the logits, at the current (or given) argmin."""
        parts = self.evaluate(policy, argmin)
        index, probs = self.index, policy.probs
        x = to_sequence_form(self.game, policy).values
        _, grad = backup_gradient(index, x, probs, self.direct)
        if self.lam > 0:
            target = self.targets[parts.argmin]
            zeros = np.zeros(index.n_sequences)
            kl = state_kl(index, policy, target)
            log_ratio = np.zeros(index.n_sequences)
            with np.errstate(divide="ignore", invalid="ignore"):
                log_ratio[1:] = np.where(probs[1:] > 0,
                                         np.log(np.maximum(probs[1:], 1e-300) / target.probs[1:]), 0.0)
            rho_seq = np.zeros(index.n_sequences)
            rho_seq[1:] = np.repeat(self.rho, index.sizes)
            kl_state = np.where(np.isfinite(kl), kl, 0.0)
            n_val, n_grad = backup_gradient(index, x, probs, zeros, self.rho * kl_state,
                                            rho_seq * (log_ratio + 1.0))
            z_val, z_grad = backup_gradient(index, x, probs, zeros, self.rho)
            if z_val > 0:
                grad = grad + self.lam * (n_grad - (n_val / z_val) * z_grad) / z_val
        return parts, softmax_chain(index, probs, grad)


def _resolve_weighting(game: GameTree, opponent, cfg: OracleConfig,
                       weighting: Optional[BehavioralPolicy]) -> BehavioralPolicy:
    return weighting if weighting is not None else weighting_opponent(game, opponent, cfg.distance.blend)


def build_objective(game: GameTree, opponent, population: Population, cfg: OracleConfig,
                    rng: Optional[np.random.Generator] = None,
                    weighting: Optional[BehavioralPolicy] = None) -> OracleObjective:
    """Draws the run's hull samples (vertices plus Dirichlet points) and floors them."""
    targets: List[BehavioralPolicy] = []
    b = None
    if cfg.lam > 0:
        rng = rng if rng is not None else np.random.default_rng(cfg.seed)
        k = max(len(population), cfg.distance.hull_samples)
        targets = hull_policies(game, sample_hull(population, k, rng), cfg.support_floor)
        b = _resolve_weighting(game, opponent, cfg, weighting)
    return OracleObjective(game, population.player, opponent, cfg.lam, targets, b)


def _as_policy(policy_or_params) -> BehavioralPolicy:
    return policy_or_params.policy() if isinstance(policy_or_params, PolicyParams) else policy_or_params


def objective_value(game: GameTree, policy_or_params, opponent, population: Population,
                    cfg: OracleConfig, rng: Optional[np.random.Generator] = None,
                    weighting: Optional[BehavioralPolicy] = None) -> float:
    objective = build_objective(game, opponent, population, cfg, rng, weighting)
    return objective.evaluate(_as_policy(policy_or_params)).objective


def objective_gradient(game: GameTree, policy_or_params, opponent, population: Population,
                       cfg: OracleConfig, rng: Optional[np.random.Generator] = None,
                       weighting: Optional[BehavioralPolicy] = None) -> Tuple[ObjectiveParts, np.ndarray]:
    objective = build_objective(game, opponent, population, cfg, rng, weighting)
    return objective.gradient(_as_policy(policy_or_params))


# -- oracles ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OracleResult:
    policy: Any
    objective: float
    utility: float
    distance: float
    steps: int


# progress(step, parts, grad_norm)
Progress = Callable[[int, ObjectiveParts, float], None]


def exact_br_oracle(game: Any, opponent) -> Any:
    """Exact best response of the other player to `opponent`; lambda plays no part."""
    return best_response(game, opponent, 3 - opponent.player)[0]


def _check_finite(parts: ObjectiveParts, step: int, player: int) -> None:
    if not np.isfinite(parts.objective):
        raise OracleDivergenceError(
            f"player {player} objective became {parts.objective} at step {step} "
            f"(utility {parts.utility}, distance {parts.distance})")


def psd_oracle_exact(game: GameTree, opponent, population: Population, cfg: OracleConfig,
                     init: Optional[BehavioralPolicy] = None,
                     rng: Optional[np.random.Generator] = None,
                     weighting: Optional[BehavioralPolicy] = None,
                     progress: Optional[Progress] = None) -> OracleResult:
    """
    Gradient ascent on the logits with backtracking: each step starts from
    the configured learning rate and halves it (at most 20 times) until the
    objective does not decrease. Stops early when the gradient norm drops
    below 1e-8 or no step is accepted.
    """
    player = population.player
    objective = build_objective(game, opponent, population, cfg, rng, weighting)
    params = PolicyParams.from_policy(init) if init is not None else PolicyParams.uniform(game, player)
    parts, grad = objective.gradient(params.policy())
    _check_finite(parts, 0, player)
    steps = 0
    for step in range(1, cfg.steps + 1):
        gnorm = float(np.linalg.norm(grad))
        if progress is not None:
            progress(step, parts, gnorm)
        if gnorm < GRAD_TOL:
            break
        lr = cfg.learning_rate
        accepted = None
        for _ in range(MAX_HALVINGS + 1):
            cand = params.step(grad, lr)
            cand_parts = objective.evaluate(cand.policy())
            _check_finite(cand_parts, step, player)
            if cand_parts.objective >= parts.objective:
                accepted = cand
                break
            lr *= 0.5
        if accepted is None:
            log.debug("player %d: no ascent step accepted at step %d", player, step)
            break
        params = accepted
        steps = step
        parts, grad = objective.gradient(params.policy())
    return OracleResult(params.policy(), parts.objective, parts.utility, parts.distance, steps)


# -- REINFORCE -------------------------------------------------------------------------

@dataclass(frozen=True)
class GradientEstimate:
    mean: np.ndarray
    stderr: np.ndarray
    mean_return: float
    mean_kl: float
    episodes: int


def _log_ratio(policy: BehavioralPolicy, target: BehavioralPolicy) -> np.ndarray:
    out = np.zeros(policy.index.n_sequences)
    with np.errstate(divide="ignore", invalid="ignore"):
        out[1:] = np.where(policy.probs[1:] > 0,
                           np.log(np.maximum(policy.probs[1:], 1e-300) / target.probs[1:]), 0.0)
    return out


def reinforce_gradient(game: GameTree, policy: BehavioralPolicy, opponent_policy: BehavioralPolicy,
                       episodes: int, rng: np.random.Generator, lam: float = 0.0,
                       target: Optional[BehavioralPolicy] = None,
                       weighting: Optional[BehavioralPolicy] = None,
                       baseline: float = 0.0, gamma: float = 1.0,
                       share_rollouts: bool = True) -> GradientEstimate:
    """
    Score-function estimate of the logit gradient of E[R] + lam * D, with R
    the (discounted) own payoff against the opponent and D the visit-weighted
    KL to `target`: sum of KL over visited own states / number of visits, as
    in the exact objective and the sampled distance. The ratio is estimated
    over the batch, so episode e's KL reward is (K_e - D * n_e) / mean(n)
    with K_e its summed KL and n_e its own-state visits, plus the direct KL
    gradient at each visit. With share_rollouts off, the KL terms use separate
    episodes against `weighting` and estimate the same distance as the exact
    oracle; otherwise the states are weighted by the opponent's own reach.
    """
    player = policy.player
    index = policy.index
    sign = game.sign(player)
    sampler = episode_sampler(game)
    plays = sampler.sample({player: policy, 3 - player: opponent_policy}, rng, episodes)
    kl_plays = plays
    if lam > 0 and not share_rollouts:
        kl_plays = sampler.sample({player: policy, 3 - player: weighting}, rng, episodes)

    probs = policy.probs
    kl_state = None
    kl_grad = None
    if lam > 0:
        if target is None:
            raise PolicyError("a regularized gradient needs a target policy")
        kl_state = state_kl(index, policy, target)
        lr_seq = _log_ratio(policy, target)
        kl_grad = np.zeros(index.n_sequences)
        if len(index):
            kl_grad[1:] = probs[1:] * (lr_seq[1:] - np.repeat(kl_state, index.sizes))

    grads = np.zeros((episodes, index.n_sequences))
    returns = np.zeros(episodes)
    ratio, mean_visits = 0.0, 0.0
    if lam > 0:
        kl_sums = np.array([sum(kl_state[s] for s, _ in kl_plays[e].visits[player])
                            for e in range(episodes)])
        visits_per = np.array([len(kl_plays[e].visits[player]) for e in range(episodes)], dtype=float)
        mean_visits = float(visits_per.mean())
        if mean_visits > 0:
            ratio = float(kl_sums.sum() / visits_per.sum())
    for e in range(episodes):
        ep = plays[e]
        visits = ep.visits[player]
        r = sign * ep.payoff
        returns[e] = r
        n = len(visits)
        g = grads[e]
        for t, (s, seq) in enumerate(visits):
            st = index.states[s]
            discounted = (gamma ** (n - 1 - t)) * r - baseline
            g[st.block] -= discounted * probs[st.block]
            g[seq] += discounted
        if mean_visits > 0:
            r_kl = (kl_sums[e] - ratio * visits_per[e]) / mean_visits
            for s, seq in kl_plays[e].visits[player]:
                st = index.states[s]
                g[st.block] -= lam * r_kl * probs[st.block]
                g[seq] += lam * r_kl
                g[st.block] += lam * kl_grad[st.block] / mean_visits
    mean = grads.mean(axis=0)
    stderr = grads.std(axis=0, ddof=1) / np.sqrt(episodes) if episodes > 1 else np.zeros_like(mean)
    if not np.all(np.isfinite(mean)):
        raise OracleDivergenceError(f"player {player} REINFORCE gradient became non-finite")
    return GradientEstimate(mean, stderr, float(returns.mean()), ratio, episodes)


def _batch_argmin(game: GameTree, policy: BehavioralPolicy, targets: Sequence[BehavioralPolicy],
                  opponent_policy: BehavioralPolicy, rng: np.random.Generator, episodes: int) -> int:
    """Hull target with the smallest visit-weighted KL over a fresh batch."""
    index = policy.index
    player = policy.player
    plays = episode_sampler(game).sample({player: policy, 3 - player: opponent_policy}, rng, episodes)
    visited = [s for ep in plays for s, _ in ep.visits[player]]
    best, best_k = np.inf, 0
    for k, target in enumerate(targets):
        # same denominator for every target
        total = float(state_kl(index, policy, target)[visited].sum()) if visited else 0.0
        if total < best:
            best, best_k = total, k
    return best_k


def psd_oracle_reinforce(game: GameTree, opponent, population: Population, cfg: OracleConfig,
                         rng: np.random.Generator, init: Optional[BehavioralPolicy] = None,
                         weighting: Optional[BehavioralPolicy] = None,
                         progress: Optional[Progress] = None) -> OracleResult:
    """
    Stochastic ascent with a fixed learning rate. The return baseline is the
    running mean of the returns of earlier batches (zero for the first batch);
    the KL reward is centered by its batch ratio.
    """
    player = population.player
    objective = build_objective(game, opponent, population, cfg, rng, weighting)
    b = objective_weighting = None
    if cfg.lam > 0:
        b = _resolve_weighting(game, opponent, cfg, weighting)
        objective_weighting = b
    opponent_policy = mixture_to_behavioral(game, opponent) if isinstance(opponent, MixedPolicy) else opponent
    kl_opponent = opponent_policy if cfg.share_rollouts or b is None else b

    params = PolicyParams.from_policy(init) if init is not None else PolicyParams.uniform(game, player)
    seen, sum_r = 0, 0.0
    steps = 0
    for step in range(1, cfg.steps + 1):
        policy = params.policy()
        target = None
        if cfg.lam > 0:
            k = _batch_argmin(game, policy, objective.targets, kl_opponent, rng, cfg.episodes)
            target = objective.targets[k]
        baseline = sum_r / seen if (cfg.baseline and seen) else 0.0
        est = reinforce_gradient(game, policy, opponent_policy, cfg.episodes, rng, cfg.lam, target,
                                 objective_weighting, baseline, cfg.gamma, cfg.share_rollouts)
        seen += est.episodes
        sum_r += est.mean_return * est.episodes
        gnorm = float(np.linalg.norm(est.mean))
        if progress is not None:
            progress(step, ObjectiveParts(est.mean_return + cfg.lam * est.mean_kl,
                                          est.mean_return, est.mean_kl, 0), gnorm)
        params = params.step(est.mean, cfg.learning_rate)
        steps = step
    final = params.policy()
    parts = objective.evaluate(final)
    _check_finite(parts, steps, player)
    return OracleResult(final, parts.objective, parts.utility, parts.distance, steps)


# -- functional games ----------------------------------------------------------------

def psd_oracle_point(game: FunctionalGame2D, opponent: MixedPolicy, population: Population,
                     cfg: OracleConfig, rng: np.random.Generator,
                     init: Optional[PointPolicy] = None,
                     progress: Optional[Progress] = None) -> OracleResult:
    """
    Projected gradient ascent on a point against a mixture of opponent points,
    with the distance to the nearest of the run's hull samples as regularizer.
    """
    player = population.player
    opp_points = [m.xy for m in opponent.population]
    opp_weights = np.asarray(opponent.weights)
    own_points = [m.xy for m in population]
    targets = []
    if cfg.lam > 0:
        k = max(len(population), cfg.distance.hull_samples)
        targets = [hull_point(game, own_points, mu.weights) for mu in sample_hull(population, k, rng)]

    def evaluate(p: np.ndarray) -> Tuple[ObjectiveParts, np.ndarray]:
        util, grad = payoff_gradient(game, p, opp_points, opp_weights)
        if not targets:
            return ObjectiveParts(util, util, 0.0, 0), grad
        dists = [point_distance(game, p, t) for t in targets]
        k = int(np.argmin([d for d, _ in dists]))
        d, dgrad = dists[k]
        return ObjectiveParts(util + cfg.lam * d, util, d, k), grad + cfg.lam * dgrad

    p = np.array(init.xy if init is not None else population[len(population) - 1].xy, dtype=float)
    p = project_to_domain(game, p)
    parts, grad = evaluate(p)
    steps = 0
    for step in range(1, cfg.steps + 1):
        _check_finite(parts, step, player)
        gnorm = float(np.linalg.norm(grad))
        if progress is not None:
            progress(step, parts, gnorm)
        if gnorm < GRAD_TOL:
            break
        lr = cfg.learning_rate
        moved = False
        for _ in range(MAX_HALVINGS + 1):
            cand = project_to_domain(game, p + lr * grad)
            cand_parts, cand_grad = evaluate(cand)
            if cand_parts.objective >= parts.objective:
                p, parts, grad, moved = cand, cand_parts, cand_grad, True
                break
            lr *= 0.5
        if not moved:
            break
        steps = step
    return OracleResult(PointPolicy(player, p), parts.objective, parts.utility, parts.distance, steps)
