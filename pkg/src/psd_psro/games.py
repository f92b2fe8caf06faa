"""
Explicit two-player zero-sum extensive-form games.

A GameTree is a flat tuple of nodes (root at index 0). On construction it
indexes every information state of both players and numbers their sequences:
sequence 0 is the empty sequence, and each information state owns a contiguous
block of sequence indices, one per legal action. States are numbered in
depth-first discovery order, so a state's parent sequence always belongs to an
earlier state.

State-id schemes (stable, whitespace free):
  kuhn       "<card>/<betting>"                       e.g. "K/pb"
  leduc      "<private>|<public or ->|<round1>|<round2>"  e.g. "Q|K|rc|r"
  goofspiel  "<prizes seen>|<past bid pairs>"          e.g. "1.2|3-1"
  matrix     "row" for player 1, "col" for player 2
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from enum import Enum, auto
from pathlib import Path
from typing import TYPE_CHECKING, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import GameError, MatrixFormatError

if TYPE_CHECKING:
    from .policy import BehavioralPolicy

log = logging.getLogger(__name__)

PLAYERS = (1, 2)
CHANCE_TOL = 1e-12


class NodeKind(Enum):
    DECISION = auto()
    CHANCE = auto()
    TERMINAL = auto()


@dataclass(frozen=True)
class Node:
    kind: NodeKind
    player: int = 0
    infostate: Optional[str] = None
    actions: Tuple[str, ...] = ()
    children: Tuple[int, ...] = ()
    probs: Tuple[float, ...] = ()
    payoff: float = 0.0


@dataclass(frozen=True)
class InfoState:
    id: str
    player: int
    actions: Tuple[str, ...]
    parent: int
    offset: int
    depth: int

    @property
    def size(self) -> int:
        return len(self.actions)

    @property
    def block(self) -> slice:
        return slice(self.offset, self.offset + len(self.actions))


class PlayerIndex:
    """Information states and sequences of one player."""

    def __init__(self, player: int, states: Sequence[InfoState]):
        self.player = player
        self.states: Tuple[InfoState, ...] = tuple(states)
        self.by_id: Dict[str, int] = {s.id: k for k, s in enumerate(self.states)}
        self.n_sequences = 1 + sum(s.size for s in self.states)

        seq_state = np.full(self.n_sequences, -1, dtype=np.int64)
        seq_parent = np.zeros(self.n_sequences, dtype=np.int64)
        for k, s in enumerate(self.states):
            seq_state[s.block] = k
            seq_parent[s.block] = s.parent
        self.seq_state = seq_state
        self.seq_parent = seq_parent
        self.offsets = np.array([s.offset for s in self.states], dtype=np.int64)
        self.sizes = np.array([s.size for s in self.states], dtype=np.int64)
        self.state_parent = np.array([s.parent for s in self.states], dtype=np.int64)
        for arr in (seq_state, seq_parent, self.offsets, self.sizes, self.state_parent):
            arr.setflags(write=False)

        # sequences grouped by the owning state's depth, shallowest first
        depth = np.array([s.depth for s in self.states], dtype=np.int64)
        seq_depth = depth[seq_state[1:]] if len(self.states) else np.zeros(0, dtype=np.int64)
        self.levels: Tuple[np.ndarray, ...] = tuple(
            np.flatnonzero(seq_depth == d) + 1 for d in range(int(seq_depth.max(initial=-1)) + 1))
        self.state_levels: Tuple[np.ndarray, ...] = tuple(
            np.flatnonzero(depth == d) for d in range(len(self.levels)))

    def __len__(self) -> int:
        return len(self.states)

    def state(self, state_id: str) -> InfoState:
        try:
            return self.states[self.by_id[state_id]]
        except KeyError:
            raise GameError(f"player {self.player} has no information state {state_id!r}") from None

    def sequence_label(self, seq: int) -> Tuple[str, str]:
        if seq == 0:
            return ("", "")
        s = self.states[int(self.seq_state[seq])]
        return (s.id, s.actions[seq - s.offset])


class GameTree:
    def __init__(self, name: str, nodes: Sequence[Node]):
        if not nodes:
            raise GameError("empty game tree")
        self.name = name
        self.nodes: Tuple[Node, ...] = tuple(nodes)
        self._index()

    # -- construction -----------------------------------------------------

    def _index(self) -> None:
        states: Dict[int, List[InfoState]] = {1: [], 2: []}
        lookup: Dict[int, Dict[str, InfoState]] = {1: {}, 2: {}}
        next_seq = {1: 1, 2: 1}

        node_chance = np.zeros(len(self.nodes))
        node_seq = np.zeros((len(self.nodes), 3), dtype=np.int64)  # columns 1, 2: last own sequence
        seen = np.zeros(len(self.nodes), dtype=bool)

        stack: List[Tuple[int, float, int, int, int, int]] = [(0, 1.0, 0, 0, 0, 0)]
        while stack:
            idx, reach, s1, s2, d1, d2 = stack.pop()
            if idx < 0 or idx >= len(self.nodes):
                raise GameError(f"child index {idx} out of range")
            if seen[idx]:
                raise GameError(f"node {idx} reached twice: not a tree")
            seen[idx] = True
            node = self.nodes[idx]
            node_chance[idx] = reach
            node_seq[idx, 1] = s1
            node_seq[idx, 2] = s2

            if node.kind is NodeKind.TERMINAL:
                if not math.isfinite(node.payoff):
                    raise GameError(f"terminal node {idx} has a non-finite payoff")
                continue

            if len(node.children) != len(node.actions) or not node.children:
                raise GameError(f"node {idx} needs one child per action")

            if node.kind is NodeKind.CHANCE:
                probs = np.asarray(node.probs, dtype=float)
                if len(probs) != len(node.children) or np.any(probs < 0) \
                        or abs(probs.sum() - 1.0) > CHANCE_TOL:
                    raise GameError(f"chance node {idx} has an invalid outcome distribution")
                for child, p in zip(node.children, probs):
                    stack.append((child, reach * float(p), s1, s2, d1, d2))
                continue

            player = node.player
            if player not in PLAYERS or node.infostate is None:
                raise GameError(f"decision node {idx} needs a player in {{1, 2}} and a state id")
            own_seq = s1 if player == 1 else s2
            depth = d1 if player == 1 else d2
            info = lookup[player].get(node.infostate)
            if info is None:
                info = InfoState(node.infostate, player, tuple(node.actions), own_seq,
                                 next_seq[player], depth)
                next_seq[player] += info.size
                lookup[player][info.id] = info
                states[player].append(info)
            elif info.actions != tuple(node.actions) or info.parent != own_seq:
                raise GameError(f"perfect recall violated at state {info.id!r} of player {player}")

            for k, child in enumerate(node.children):
                seq = info.offset + k
                if player == 1:
                    stack.append((child, reach, seq, s2, d1 + 1, d2))
                else:
                    stack.append((child, reach, s1, seq, d1, d2 + 1))

        if not seen.all():
            raise GameError(f"{int((~seen).sum())} nodes are unreachable from the root")

        self.players: Dict[int, PlayerIndex] = {p: PlayerIndex(p, states[p]) for p in PLAYERS}
        self.node_chance = node_chance
        self.node_seq = node_seq

        terminals = np.array([k for k, n in enumerate(self.nodes) if n.kind is NodeKind.TERMINAL],
                             dtype=np.int64)
        self.terminals = terminals
        self.term_chance = node_chance[terminals]
        self.term_seq = {p: node_seq[terminals, p] for p in PLAYERS}
        self.term_payoff = np.array([self.nodes[k].payoff for k in terminals])

        self.decisions: Dict[int, np.ndarray] = {}
        self.decision_state: Dict[int, np.ndarray] = {}
        for p in PLAYERS:
            idxs = np.array([k for k, n in enumerate(self.nodes)
                             if n.kind is NodeKind.DECISION and n.player == p], dtype=np.int64)
            self.decisions[p] = idxs
            by_id = self.players[p].by_id
            self.decision_state[p] = np.array([by_id[self.nodes[k].infostate] for k in idxs],
                                              dtype=np.int64)

        node_state = np.full(len(self.nodes), -1, dtype=np.int64)
        for p in PLAYERS:
            node_state[self.decisions[p]] = self.decision_state[p]
        self.node_state = node_state

        # longest root-to-terminal path, in edges
        height = 0
        depth_stack = [(0, 0)]
        while depth_stack:
            idx, d = depth_stack.pop()
            height = max(height, d)
            depth_stack.extend((c, d + 1) for c in self.nodes[idx].children)
        self.height = height

    # -- queries ----------------------------------------------------------

    def index(self, player: int) -> PlayerIndex:
        if player not in PLAYERS:
            raise GameError(f"player must be 1 or 2, got {player}")
        return self.players[player]

    def sign(self, player: int) -> float:
        return 1.0 if player == 1 else -1.0

    def utility_from_sequences(self, x1: np.ndarray, x2: np.ndarray) -> float:
        """u_1 from extended sequence-form vectors (index 0 = empty sequence = 1)."""
        w = self.term_chance * x1[self.term_seq[1]] * x2[self.term_seq[2]]
        return float(np.dot(w, self.term_payoff))

    def sequence_payoffs(self, player: int, x_opp: np.ndarray) -> np.ndarray:
        """Per own sequence: sum over terminals ending there of chance * opponent reach * u_player."""
        opp = 3 - player
        w = self.sign(player) * self.term_chance * x_opp[self.term_seq[opp]] * self.term_payoff
        return np.bincount(self.term_seq[player], weights=w,
                           minlength=self.players[player].n_sequences)

    def external_reach(self, player: int, x_opp: np.ndarray) -> np.ndarray:
        """Per own information state: chance reach times opponent reach summed over its nodes."""
        opp = 3 - player
        nodes = self.decisions[player]
        w = self.node_chance[nodes] * x_opp[self.node_seq[nodes, opp]]
        return np.bincount(self.decision_state[player], weights=w,
                           minlength=len(self.players[player]))

    def __repr__(self) -> str:
        return (f"GameTree({self.name!r}, nodes={len(self.nodes)}, "
                f"states=({len(self.players[1])}, {len(self.players[2])}))")


class _TreeBuilder:
    def __init__(self):
        self.nodes: List[Optional[Node]] = []

    def reserve(self) -> int:
        self.nodes.append(None)
        return len(self.nodes) - 1

    def set(self, idx: int, node: Node) -> int:
        self.nodes[idx] = node
        return idx

    def terminal(self, payoff: float) -> int:
        return self.set(self.reserve(), Node(NodeKind.TERMINAL, payoff=float(payoff)))

    def build(self, name: str) -> GameTree:
        return GameTree(name, [n for n in self.nodes])  # type: ignore[misc]


def validate_perfect_recall(game: GameTree) -> bool:
    """Recompute every node's own action history and check states agree on it."""
    histories: Dict[Tuple[int, str], Tuple[Tuple[str, str], ...]] = {}
    actions: Dict[Tuple[int, str], Tuple[str, ...]] = {}
    stack: List[Tuple[int, Tuple, Tuple]] = [(0, (), ())]
    while stack:
        idx, h1, h2 = stack.pop()
        node = game.nodes[idx]
        if node.kind is NodeKind.TERMINAL:
            continue
        if node.kind is NodeKind.CHANCE:
            if abs(sum(node.probs) - 1.0) > CHANCE_TOL:
                raise GameError(f"chance node {idx} does not sum to 1")
            stack.extend((c, h1, h2) for c in node.children)
            continue
        key = (node.player, node.infostate)
        own = h1 if node.player == 1 else h2
        if key in histories:
            if histories[key] != own or actions[key] != node.actions:
                raise GameError(f"perfect recall violated at {key}")
        else:
            histories[key] = own
            actions[key] = node.actions
        for a, c in zip(node.actions, node.children):
            step = ((node.infostate, a),)
            if node.player == 1:
                stack.append((c, h1 + step, h2))
            else:
                stack.append((c, h1, h2 + step))
    for p in PLAYERS:
        if set(game.index(p).by_id) != {k[1] for k in histories if k[0] == p}:
            raise GameError(f"player {p} has information states without tree nodes")
    return True


# -- Kuhn ----------------------------------------------------------------

KUHN_CARDS = ("J", "Q", "K")


def build_kuhn() -> GameTree:
    """3-card Kuhn poker, ante 1, bet 1. Actions p(ass) / b(et)."""
    b = _TreeBuilder()
    root = b.reserve()
    deals = list(itertools.permutations(range(3), 2))
    children = []
    for c1, c2 in deals:
        children.append(_kuhn_betting(b, c1, c2, ""))
    b.set(root, Node(NodeKind.CHANCE,
                     actions=tuple(KUHN_CARDS[c1] + KUHN_CARDS[c2] for c1, c2 in deals),
                     children=tuple(children),
                     probs=tuple([1.0 / len(deals)] * len(deals))))
    return b.build("kuhn")


def _kuhn_betting(b: _TreeBuilder, c1: int, c2: int, history: str) -> int:
    showdown = 1.0 if c1 > c2 else -1.0
    if history == "pp":
        return b.terminal(showdown)
    if history in ("bb", "pbb"):
        return b.terminal(2 * showdown)
    if history == "bp":
        return b.terminal(1.0)
    if history == "pbp":
        return b.terminal(-1.0)

    player = 1 if len(history) % 2 == 0 else 2
    card = c1 if player == 1 else c2
    idx = b.reserve()
    children = tuple(_kuhn_betting(b, c1, c2, history + a) for a in ("p", "b"))
    return b.set(idx, Node(NodeKind.DECISION, player=player,
                           infostate=f"{KUHN_CARDS[card]}/{history}",
                           actions=("p", "b"), children=children))


# -- Leduc ---------------------------------------------------------------

LEDUC_RANKS = ("J", "Q", "K")
LEDUC_RAISE = (2, 4)
LEDUC_MAX_RAISES = 2


@dataclass
class _LeducState:
    cards: Tuple[int, int]
    public: Optional[int] = None
    rounds: List[str] = field(default_factory=lambda: ["", ""])
    contrib: List[int] = field(default_factory=lambda: [1, 1])
    raises: int = 0
    to_act: int = 1


def build_leduc() -> GameTree:
    """Two-suit, three-rank Leduc hold'em: raises 2 then 4, at most two raises per round."""
    deck = [r for r in range(3) for _ in range(2)]
    b = _TreeBuilder()
    root = b.reserve()
    deals = [(i, j) for i in range(6) for j in range(6) if i != j]
    children = []
    for i, j in deals:
        state = _LeducState(cards=(i, j))
        children.append(_leduc_decision(b, deck, state, 0))
    b.set(root, Node(NodeKind.CHANCE,
                     actions=tuple(f"{i}{j}" for i, j in deals),
                     children=tuple(children),
                     probs=tuple([1.0 / len(deals)] * len(deals))))
    return b.build("leduc")


def _leduc_state_id(deck: Sequence[int], st: _LeducState, player: int) -> str:
    private = LEDUC_RANKS[deck[st.cards[player - 1]]]
    public = LEDUC_RANKS[deck[st.public]] if st.public is not None else "-"
    return f"{private}|{public}|{st.rounds[0]}|{st.rounds[1]}"


def _leduc_decision(b: _TreeBuilder, deck: Sequence[int], st: _LeducState, rnd: int) -> int:
    me = st.to_act - 1
    facing = st.contrib[me] < st.contrib[1 - me]
    actions = []
    if facing:
        actions.append("f")
    actions.append("c")
    if st.raises < LEDUC_MAX_RAISES:
        actions.append("r")

    idx = b.reserve()
    children = []
    for a in actions:
        nxt = _LeducState(st.cards, st.public, list(st.rounds), list(st.contrib), st.raises, st.to_act)
        nxt.rounds[rnd] += a
        if a == "f":
            payoff = -st.contrib[0] if st.to_act == 1 else st.contrib[1]
            children.append(b.terminal(payoff))
            continue
        if a == "r":
            nxt.contrib[me] = max(st.contrib) + LEDUC_RAISE[rnd]
            nxt.raises += 1
            nxt.to_act = 3 - st.to_act
            children.append(_leduc_decision(b, deck, nxt, rnd))
            continue
        nxt.contrib[me] = max(st.contrib)
        if len(st.rounds[rnd]) == 0:
            nxt.to_act = 3 - st.to_act
            children.append(_leduc_decision(b, deck, nxt, rnd))
        elif rnd == 0:
            children.append(_leduc_public(b, deck, nxt))
        else:
            children.append(b.terminal(_leduc_showdown(deck, nxt)))
    return b.set(idx, Node(NodeKind.DECISION, player=st.to_act,
                           infostate=_leduc_state_id(deck, st, st.to_act),
                           actions=tuple(actions), children=tuple(children)))


def _leduc_public(b: _TreeBuilder, deck: Sequence[int], st: _LeducState) -> int:
    idx = b.reserve()
    remaining = [c for c in range(len(deck)) if c not in st.cards]
    children = []
    for c in remaining:
        nxt = _LeducState(st.cards, c, list(st.rounds), list(st.contrib), 0, 1)
        children.append(_leduc_decision(b, deck, nxt, 1))
    return b.set(idx, Node(NodeKind.CHANCE, actions=tuple(str(c) for c in remaining),
                           children=tuple(children),
                           probs=tuple([1.0 / len(remaining)] * len(remaining))))


def _leduc_showdown(deck: Sequence[int], st: _LeducState) -> float:
    r1, r2 = deck[st.cards[0]], deck[st.cards[1]]
    pub = deck[st.public]
    pot = st.contrib[0]
    if r1 == pub and r2 != pub:
        return float(pot)
    if r2 == pub and r1 != pub:
        return -float(pot)
    if r1 == r2:
        return 0.0
    return float(pot) if r1 > r2 else -float(pot)


# -- Goofspiel -------------------------------------------------------------

def build_goofspiel(n: int, prize_order: str = "fixed-ascending",
                    score_difference: bool = False) -> GameTree:
    """
    n bid cards per player and n prize cards. Bids are simultaneous: player 2's
    state does not show player 1's current bid. Higher bid takes the prize, ties
    discard it. Terminal payoff is sign(score1 - score2), or the raw difference.
    """
    if not isinstance(n, int) or not 2 <= n <= 8:
        raise GameError(f"goofspiel needs 2 <= n <= 8 cards, got {n!r}")
    if prize_order not in ("fixed-ascending", "chance-shuffled"):
        raise GameError(f"unknown prize order {prize_order!r}")
    if n >= 6:
        log.warning("goofspiel with %d cards has %d leaves; the explicit tree will be very large",
                    n, math.factorial(n) ** 2)

    b = _TreeBuilder()
    cards = tuple(range(1, n + 1))
    root = _goofspiel_round(b, n, prize_order == "chance-shuffled", score_difference,
                            cards, cards, cards, (), (), 0)
    assert root == 0
    return b.build(f"goofspiel{n}")


def _goofspiel_round(b, n, shuffled, score_difference, hand1, hand2, prizes_left,
                     prizes_seen, bids, score) -> int:
    if not hand1:
        if score_difference:
            return b.terminal(score)
        return b.terminal(float(np.sign(score)))
    if shuffled:
        idx = b.reserve()
        children = tuple(
            _goofspiel_bid1(b, n, shuffled, score_difference, hand1, hand2,
                            tuple(x for x in prizes_left if x != prize), prizes_seen + (prize,), bids, score)
            for prize in prizes_left)
        return b.set(idx, Node(NodeKind.CHANCE, actions=tuple(str(p) for p in prizes_left),
                               children=children,
                               probs=tuple([1.0 / len(prizes_left)] * len(prizes_left))))
    prize = prizes_left[0]
    return _goofspiel_bid1(b, n, shuffled, score_difference, hand1, hand2,
                           prizes_left[1:], prizes_seen + (prize,), bids, score)


def _goofspiel_state_id(prizes_seen, bids) -> str:
    return ".".join(map(str, prizes_seen)) + "|" + ".".join(f"{x}-{y}" for x, y in bids)


def _goofspiel_bid1(b, n, shuffled, score_difference, hand1, hand2, prizes_left,
                    prizes_seen, bids, score) -> int:
    sid = _goofspiel_state_id(prizes_seen, bids)
    idx = b.reserve()
    children = []
    for bid1 in hand1:
        idx2 = b.reserve()
        children2 = []
        for bid2 in hand2:
            prize = prizes_seen[-1]
            delta = prize if bid1 > bid2 else (-prize if bid2 > bid1 else 0)
            children2.append(_goofspiel_round(
                b, n, shuffled, score_difference,
                tuple(c for c in hand1 if c != bid1), tuple(c for c in hand2 if c != bid2),
                prizes_left, prizes_seen, bids + ((bid1, bid2),), score + delta))
        b.set(idx2, Node(NodeKind.DECISION, player=2, infostate=sid,
                         actions=tuple(str(c) for c in hand2), children=tuple(children2)))
        children.append(idx2)
    return b.set(idx, Node(NodeKind.DECISION, player=1, infostate=sid,
                           actions=tuple(str(c) for c in hand1), children=tuple(children)))


# -- Matrix games ----------------------------------------------------------

@dataclass(frozen=True)
class MatrixGame:
    payoffs: np.ndarray
    row_labels: Tuple[str, ...] = ()
    col_labels: Tuple[str, ...] = ()

    def __post_init__(self):
        m = np.array(self.payoffs, dtype=float)
        if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
            raise GameError("payoff matrix must be a non-empty 2D array")
        if not np.all(np.isfinite(m)):
            raise GameError("payoff matrix has non-finite entries")
        m.setflags(write=False)
        object.__setattr__(self, "payoffs", m)
        rows = tuple(self.row_labels) or tuple(f"r{i}" for i in range(m.shape[0]))
        cols = tuple(self.col_labels) or tuple(f"c{j}" for j in range(m.shape[1]))
        if len(rows) != m.shape[0] or len(cols) != m.shape[1]:
            raise GameError("label count does not match the payoff matrix")
        object.__setattr__(self, "row_labels", rows)
        object.__setattr__(self, "col_labels", cols)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.payoffs.shape  # type: ignore[return-value]


RPS = MatrixGame(np.array([[0.0, -1.0, 1.0], [1.0, 0.0, -1.0], [-1.0, 1.0, 0.0]]),
                 ("R", "P", "S"), ("R", "P", "S"))


def matrix_tree(game: MatrixGame, name: str = "matrix") -> GameTree:
    """One decision per player; player 2 does not see player 1's choice."""
    b = _TreeBuilder()
    root = b.reserve()
    children = []
    for i in range(game.shape[0]):
        idx = b.reserve()
        leaves = tuple(b.terminal(game.payoffs[i, j]) for j in range(game.shape[1]))
        children.append(b.set(idx, Node(NodeKind.DECISION, player=2, infostate="col",
                                        actions=game.col_labels, children=leaves)))
    b.set(root, Node(NodeKind.DECISION, player=1, infostate="row",
                     actions=game.row_labels, children=tuple(children)))
    return b.build(name)


def build_rps() -> GameTree:
    return matrix_tree(RPS, "rps")


def load_matrix_game(path: Path) -> MatrixGame:
    """
    Plain text: first line "R C", then R lines of C whitespace-separated floats.
    Lines starting with '#' are comments.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise MatrixFormatError(f"cannot read file: {e}", path) from e

    lines = [(k + 1, ln) for k, ln in enumerate(text.split("\n"))
             if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise MatrixFormatError("empty file", path, 1)

    head_no, head = lines[0]
    dims = head.split()
    if len(dims) != 2:
        raise MatrixFormatError("first line must be 'R C'", path, head_no)
    try:
        n_rows, n_cols = int(dims[0]), int(dims[1])
    except ValueError:
        raise MatrixFormatError("dimensions must be integers", path, head_no) from None
    if n_rows < 1 or n_cols < 1:
        raise MatrixFormatError("dimensions must be positive", path, head_no)

    body = lines[1:]
    if len(body) != n_rows:
        line = body[n_rows][0] if len(body) > n_rows else (body[-1][0] if body else head_no)
        raise MatrixFormatError(f"dimension mismatch: expected {n_rows} rows, found {len(body)}",
                                path, line)

    m = np.empty((n_rows, n_cols))
    for r, (line_no, ln) in enumerate(body):
        fields = ln.split()
        if len(fields) != n_cols:
            raise MatrixFormatError(
                f"dimension mismatch in row {r}: expected {n_cols} entries, found {len(fields)}",
                path, line_no)
        for c, tok in enumerate(fields):
            try:
                m[r, c] = float(tok)
            except ValueError:
                raise MatrixFormatError(f"non-numeric entry {tok!r}", path, line_no, c + 1) from None
            if not math.isfinite(m[r, c]):
                raise MatrixFormatError(f"non-finite entry {tok!r}", path, line_no, c + 1)
    return MatrixGame(m)


def format_matrix(m: np.ndarray) -> str:
    rows = [f"{m.shape[0]} {m.shape[1]}"]
    rows += [" ".join(repr(float(v)) for v in row) for row in m]
    return "\n".join(rows) + "\n"


def save_matrix_game(game: MatrixGame, path: Path, comments: Iterable[str] = ()) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    text = format_matrix(game.payoffs) + "".join(f"# {c}\n" for c in comments)
    with path.open("w", encoding="utf-8", newline="\n") as f:
        f.write(text)


# -- Utilities -------------------------------------------------------------

def expected_utility(game: GameTree, pi1: "BehavioralPolicy", pi2: "BehavioralPolicy") -> float:
    """Exact u_1(pi1, pi2) over all terminal nodes."""
    from .policy import to_sequence_form

    if pi1.player != 1 or pi2.player != 2:
        raise GameError("expected_utility takes player 1's policy first, then player 2's")
    x1 = to_sequence_form(game, pi1)
    x2 = to_sequence_form(game, pi2)
    return game.utility_from_sequences(x1.values, x2.values)


BUILDERS = {
    "kuhn": "3-card Kuhn poker (6 states per player)",
    "leduc": "Leduc hold'em, 6-card deck, two betting rounds",
    "goofspiel": "Goofspiel with n cards (--goofspiel-cards), fixed or shuffled prizes",
    "rps": "Rock-Paper-Scissors as a one-decision tree",
    "matrix": "any payoff-matrix file (--matrix-file) as a one-decision tree",
    "mixture7": "non-transitive mixture of 7 Gaussian humps (functional game)",
    "disc": "disc game on the unit disc (functional game)",
}
