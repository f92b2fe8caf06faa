from __future__ import annotations

import bisect
import logging
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Sequence, Tuple

import numpy as np

from .errors import PolicyError
from .games import GameTree, NodeKind, PlayerIndex

log = logging.getLogger(__name__)

SUM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class BehavioralPolicy:
    """
    Per-state action distributions for one player, stored flat in the
    player's sequence layout: probs[state.block] is the distribution at that
    state and probs[0] (the empty sequence) is 1.
    """
    player: int
    index: PlayerIndex
    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.shape != (self.index.n_sequences,):
            raise PolicyError(f"policy has {p.shape[0] if p.ndim else 0} entries, "
                              f"player {self.player} needs {self.index.n_sequences}")
        p[0] = 1.0
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise PolicyError("policy has negative or non-finite probabilities")
        if len(self.index):
            sums = np.add.reduceat(p[1:], self.index.offsets - 1)
            bad = np.flatnonzero(np.abs(sums - 1.0) > SUM_TOL)
            if len(bad):
                raise PolicyError(f"distribution at state {self.index.states[bad[0]].id!r} "
                                  f"sums to {float(sums[bad[0]])!r}")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def uniform(cls, game: GameTree, player: int) -> "BehavioralPolicy":
        index = game.index(player)
        p = np.ones(index.n_sequences)
        if len(index):
            p[1:] = 1.0 / np.repeat(index.sizes, index.sizes)
        return cls(player, index, p)

    @classmethod
    def from_mapping(cls, game: GameTree, player: int,
                     mapping: Mapping[str, Sequence[float]]) -> "BehavioralPolicy":
        index = game.index(player)
        p = np.ones(index.n_sequences)
        missing = [s.id for s in index.states if s.id not in mapping]
        if missing:
            raise PolicyError(f"policy is missing information state {missing[0]!r}")
        extra = set(mapping) - set(index.by_id)
        if extra:
            raise PolicyError(f"unknown information state {sorted(extra)[0]!r}")
        for s in index.states:
            dist = np.asarray(mapping[s.id], dtype=float)
            if dist.shape != (s.size,):
                raise PolicyError(f"state {s.id!r} needs {s.size} probabilities, got {dist.size}")
            p[s.block] = dist
        return cls(player, index, p)

    def distribution(self, state_id: str) -> np.ndarray:
        return self.probs[self.index.state(state_id).block]

    def as_dict(self) -> Dict[str, np.ndarray]:
        return {s.id: self.probs[s.block] for s in self.index.states}


@dataclass(frozen=True, eq=False)
class SequenceForm:
    """Realization plan; values[0] is the empty sequence (always 1)."""
    player: int
    index: PlayerIndex
    values: np.ndarray

    @property
    def x(self) -> np.ndarray:
        return self.values[1:]

    def consistency_error(self) -> float:
        """max over states of |sum_a x(s, a) - x(parent(s))|"""
        if not len(self.index):
            return 0.0
        sums = np.add.reduceat(self.values[1:], self.index.offsets - 1)
        return float(np.max(np.abs(sums - self.values[self.index.state_parent]), initial=0.0))


@dataclass(frozen=True, eq=False)
class Population:
    player: int
    members: Tuple[Any, ...]

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise PolicyError("a population needs at least one policy")
        for m in members:
            if getattr(m, "player", self.player) != self.player:
                raise PolicyError(f"population of player {self.player} holds a policy "
                                  f"of player {m.player}")
        object.__setattr__(self, "members", members)

    def __len__(self) -> int:
        return len(self.members)

    def __getitem__(self, k: int):
        return self.members[k]

    def __iter__(self):
        return iter(self.members)

    def extended(self, *policies) -> "Population":
        return Population(self.player, self.members + tuple(policies))

    def prefix(self, size: int) -> "Population":
        return Population(self.player, self.members[:size])


@dataclass(frozen=True, eq=False)
class MixedPolicy:
    population: Population
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.shape != (len(self.population),):
            raise PolicyError(f"mixture has {w.size} weights for a population of "
                              f"{len(self.population)}")
        if np.any(w < -SUM_TOL) or abs(w.sum() - 1.0) > SUM_TOL:
            raise PolicyError("mixture weights must lie on the simplex")
        w = np.clip(w, 0.0, None)
        w = w / w.sum()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def player(self) -> int:
        return self.population.player

    @classmethod
    def vertex(cls, population: Population, k: int) -> "MixedPolicy":
        w = np.zeros(len(population))
        w[k] = 1.0
        return cls(population, w)

    @classmethod
    def uniform(cls, population: Population) -> "MixedPolicy":
        return cls(population, np.full(len(population), 1.0 / len(population)))


def _check_owner(game: GameTree, policy: BehavioralPolicy) -> PlayerIndex:
    index = game.index(policy.player)
    if policy.index is not index and (policy.index.n_sequences != index.n_sequences
                                      or policy.index.by_id != index.by_id):
        raise PolicyError(f"policy does not cover the information states of {game.name}")
    return index


def to_sequence_form(game: GameTree, policy: BehavioralPolicy) -> SequenceForm:
    """x(s, a) = product of own action probabilities along the unique path to (s, a)."""
    index = _check_owner(game, policy)
    x = np.ones(index.n_sequences)
    for level in index.levels:
        x[level] = x[index.seq_parent[level]] * policy.probs[level]
    x.setflags(write=False)
    return SequenceForm(policy.player, index, x)


def sequence_to_behavioral(game: GameTree, seq: SequenceForm) -> BehavioralPolicy:
    """pi(a|s) = x(s, a) / |x(s)|_1; states with |x(s)|_1 = 0 get the uniform distribution."""
    index = game.index(seq.player)
    p = np.ones(index.n_sequences)
    if len(index):
        x = np.clip(np.asarray(seq.values, dtype=float), 0.0, None)
        sums = np.add.reduceat(x[1:], index.offsets - 1)
        per_seq = np.repeat(sums, index.sizes)
        sizes = np.repeat(index.sizes, index.sizes).astype(float)
        with np.errstate(divide="ignore", invalid="ignore"):
            p[1:] = np.where(per_seq > 0, x[1:] / np.where(per_seq > 0, per_seq, 1.0), 1.0 / sizes)
        # renormalize away rounding so the result passes the simplex check
        sums = np.add.reduceat(p[1:], index.offsets - 1)
        p[1:] /= np.repeat(sums, index.sizes)
    return BehavioralPolicy(seq.player, index, p)


def mixture_sequence_form(game: GameTree, mixture: MixedPolicy) -> SequenceForm:
    index = game.index(mixture.player)
    x = np.zeros(index.n_sequences)
    for w, member in zip(mixture.weights, mixture.population):
        if w > 0:
            x += w * to_sequence_form(game, member).values
    x[0] = 1.0
    x.setflags(write=False)
    return SequenceForm(mixture.player, index, x)


def mixture_to_behavioral(game: GameTree, mixture: MixedPolicy) -> BehavioralPolicy:
    """Behavioral policy realization-equivalent to playing member k with probability w_k."""
    return sequence_to_behavioral(game, mixture_sequence_form(game, mixture))


def sample_hull(population: Population, k: int, rng: np.random.Generator) -> List[MixedPolicy]:
    """
    Every vertex of the hull, then max(0, k - |population|) Dirichlet(1, ..., 1)
    interior points. Draws are made one at a time so a larger k extends a
    smaller k's sample set under the same seed.
    """
    if k < 1:
        raise PolicyError("hull sample count must be >= 1")
    n = len(population)
    samples = [MixedPolicy.vertex(population, j) for j in range(n)]
    alpha = np.ones(n)
    for _ in range(max(0, k - n)):
        samples.append(MixedPolicy(population, rng.dirichlet(alpha) if n > 1 else np.ones(1)))
    return samples


def blend_uniform(game: GameTree, policy: BehavioralPolicy, share: float) -> BehavioralPolicy:
    """(1 - share) * policy + share * uniform at every state."""
    uniform = BehavioralPolicy.uniform(game, policy.player)
    return BehavioralPolicy(policy.player, policy.index,
                            (1.0 - share) * policy.probs + share * uniform.probs)


def random_policy(game: GameTree, player: int, rng: np.random.Generator,
                  concentration: float = 1.0) -> BehavioralPolicy:
    index = game.index(player)
    p = np.ones(index.n_sequences)
    for s in index.states:
        p[s.block] = rng.dirichlet(np.full(s.size, concentration))
    return BehavioralPolicy(player, index, p)


def pure_policy(game: GameTree, player: int, choices: Mapping[str, str] | None = None,
                default: int = 0) -> BehavioralPolicy:
    """Deterministic policy: choices[state_id] names the action, else action index `default`."""
    index = game.index(player)
    p = np.ones(index.n_sequences)
    for s in index.states:
        p[s.block] = 0.0
        if choices and s.id in choices:
            try:
                a = s.actions.index(choices[s.id])
            except ValueError:
                raise PolicyError(f"state {s.id!r} has no action {choices[s.id]!r}") from None
        else:
            a = min(default, s.size - 1)
        p[s.offset + a] = 1.0
    return BehavioralPolicy(player, index, p)


# -- text format: one line per state, "state_id p1 p2 ... pk" ------------------

def format_policy(policy: BehavioralPolicy) -> str:
    lines = [f"# player {policy.player}"]
    for s in policy.index.states:
        lines.append(" ".join([s.id] + [repr(float(v)) for v in policy.probs[s.block]]))
    return "\n".join(lines) + "\n"


def save_policy(policy: BehavioralPolicy, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as f:
        f.write(format_policy(policy))


def parse_policy(game: GameTree, player: int, lines: Iterable[str],
                 path: Path | None = None) -> BehavioralPolicy:
    mapping: Dict[str, List[float]] = {}
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        try:
            mapping[fields[0]] = [float(v) for v in fields[1:]]
        except ValueError:
            raise PolicyError(f"line {line_no}: non-numeric probability", path) from None
    try:
        return BehavioralPolicy.from_mapping(game, player, mapping)
    except PolicyError as e:
        raise PolicyError(str(e), path) from None


def load_policy(game: GameTree, player: int, path: Path) -> BehavioralPolicy:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise PolicyError(f"cannot read policy: {e}", path) from e
    return parse_policy(game, player, text.splitlines(), path)


# -- Monte Carlo episodes ------------------------------------------------------

@dataclass(frozen=True)
class Episode:
    """One sampled play: payoff to player 1 and each player's (state, sequence) visits in order."""
    payoff: float
    visits: Dict[int, Tuple[Tuple[int, int], ...]]


def _cdf(probs) -> Tuple[List[float], int]:
    """Cumulative sums and the last action with positive probability."""
    probs = np.asarray(probs, dtype=float)
    return np.cumsum(probs).tolist(), int(np.flatnonzero(probs > 0)[-1])


class EpisodeSampler:
    """
    Walks a GameTree with per-state cumulative distributions; one draw per
    tree level. A draw past the rounded total falls on the last action with
    positive probability.
    """

    def __init__(self, game: GameTree):
        self.game = game
        self._chance_cum = {}
        for k, node in enumerate(game.nodes):
            if node.kind is NodeKind.CHANCE:
                self._chance_cum[k] = _cdf(node.probs)

    @staticmethod
    def _cumulative(policy: BehavioralPolicy) -> List[Tuple[List[float], int]]:
        return [_cdf(policy.probs[s.block]) for s in policy.index.states]

    def sample(self, policies: Mapping[int, BehavioralPolicy], rng: np.random.Generator,
               count: int) -> List[Episode]:
        game = self.game
        cums = {p: self._cumulative(policies[p]) for p in (1, 2)}
        offsets = {p: [s.offset for s in game.index(p).states] for p in (1, 2)}
        episodes = []
        for _ in range(count):
            draws = rng.random(max(game.height, 1)).tolist()
            visits: Dict[int, List[Tuple[int, int]]] = {1: [], 2: []}
            idx, level = 0, 0
            node = game.nodes[0]
            while node.children:
                u = draws[level]
                level += 1
                if idx in self._chance_cum:
                    cum, last = self._chance_cum[idx]
                    a = min(bisect.bisect_right(cum, u), last)
                else:
                    p = node.player
                    s = int(game.node_state[idx])
                    cum, last = cums[p][s]
                    a = min(bisect.bisect_right(cum, u), last)
                    visits[p].append((s, offsets[p][s] + a))
                idx = node.children[a]
                node = game.nodes[idx]
            episodes.append(Episode(node.payoff, {p: tuple(v) for p, v in visits.items()}))
        return episodes


@lru_cache(maxsize=16)
def episode_sampler(game: GameTree) -> EpisodeSampler:
    return EpisodeSampler(game)
