"""Restricted meta-games: payoff filling, zero-sum Nash solving, rectified weights."""
from __future__ import annotations

import concurrent.futures
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from .errors import MetaGameError
from .functional import FunctionalGame2D, functional_payoff
from .games import GameTree, expected_utility, format_matrix
from .policy import Population

log = logging.getLogger(__name__)

NE_TOL = 1e-8
# matrices with more entries than this go straight to regret matching
LP_MAX_ENTRIES = 4_000_000
REGRET_ITERS = 200_000


@dataclass(frozen=True)
class MetaNE:
    row: np.ndarray
    col: np.ndarray
    value: float


@dataclass(frozen=True, eq=False)
class MetaGame:
    row: Population
    col: Population
    payoffs: np.ndarray
    ne: Optional[MetaNE] = None
    # utility evaluations spent building this matrix from the previous one
    evaluations: int = 0

    def __post_init__(self):
        m = np.array(self.payoffs, dtype=float)
        if m.shape != (len(self.row), len(self.col)):
            raise MetaGameError(f"payoff matrix {m.shape} does not match populations "
                                f"({len(self.row)}, {len(self.col)})")
        m.setflags(write=False)
        object.__setattr__(self, "payoffs", m)

    def solved(self) -> "MetaGame":
        if self.ne is not None:
            return self
        row, col, value = solve_zero_sum_ne(self.payoffs)
        return MetaGame(self.row, self.col, self.payoffs, MetaNE(row, col, value), self.evaluations)

    def for_player(self, player: int) -> np.ndarray:
        """Payoffs from `player`'s point of view, own population on the rows."""
        return self.payoffs if player == 1 else -self.payoffs.T


def utility(game: Any, policy1, policy2) -> float:
    """u_1 for a tree game or a functional game."""
    if isinstance(game, GameTree):
        return expected_utility(game, policy1, policy2)
    if isinstance(game, FunctionalGame2D):
        return functional_payoff(game, policy1.xy, policy2.xy)
    raise MetaGameError(f"unsupported game type {type(game).__name__}")


def fill_payoff_matrix(game: Any, row: Population, col: Population,
                       previous: Optional[MetaGame] = None, workers: int = 1) -> MetaGame:
    """
    M[j, k] = u_1(row[j], col[k]), exactly. With `previous` (whose populations
    must be prefixes of these), only the missing entries are evaluated.
    """
    n, m = len(row), len(col)
    payoffs = np.zeros((n, m))
    known = np.zeros((n, m), dtype=bool)
    if previous is not None:
        pn, pm = previous.payoffs.shape
        if pn > n or pm > m or any(a is not b for a, b in zip(previous.row, row)) \
                or any(a is not b for a, b in zip(previous.col, col)):
            raise MetaGameError("previous meta-game populations are not prefixes of the new ones")
        payoffs[:pn, :pm] = previous.payoffs
        known[:pn, :pm] = True

    todo = [(j, k) for j in range(n) for k in range(m) if not known[j, k]]
    if workers > 1 and len(todo) > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(lambda jk: utility(game, row[jk[0]], col[jk[1]]), todo))
    else:
        values = [utility(game, row[j], col[k]) for j, k in todo]
    for (j, k), v in zip(todo, values):
        payoffs[j, k] = v
    log.debug("filled %d meta-game entries (%dx%d)", len(todo), n, m)
    return MetaGame(row, col, payoffs, evaluations=len(todo))


# -- Nash equilibrium of a zero-sum matrix game --------------------------------

def ne_gap(m: np.ndarray, row: np.ndarray, col: np.ndarray) -> float:
    """Half the sum of both players' best deviation gains against (row, col) on m."""
    m = np.asarray(m, dtype=float)
    return 0.5 * float(np.max(m @ col) - np.min(row @ m))


def _maximin_lp(m: np.ndarray) -> Optional[np.ndarray]:
    """Row player's maximin strategy: max v s.t. m^T x >= v, x on the simplex."""
    n, k = m.shape
    c = np.zeros(n + 1)
    c[-1] = -1.0
    a_ub = np.hstack([-m.T, np.ones((k, 1))])
    b_ub = np.zeros(k)
    a_eq = np.hstack([np.ones((1, n)), np.zeros((1, 1))])
    bounds = [(0, None)] * n + [(None, None)]
    res = optimize.linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0], bounds=bounds,
                           method="highs",
                           options={"primal_feasibility_tolerance": 1e-10,
                                    "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        log.warning("meta-game LP failed: %s", res.message)
        return None
    x = np.clip(res.x[:n], 0.0, None)
    return x / x.sum()


def regret_matching(m: np.ndarray, iterations: int = REGRET_ITERS) -> Tuple[np.ndarray, np.ndarray]:
    """Average strategies of simultaneous regret matching+ self-play."""
    n, k = m.shape
    reg_r, reg_c = np.zeros(n), np.zeros(k)
    avg_r, avg_c = np.zeros(n), np.zeros(k)
    x, y = np.full(n, 1.0 / n), np.full(k, 1.0 / k)
    for t in range(1, iterations + 1):
        ur = m @ y
        uc = -(x @ m)
        reg_r = np.maximum(reg_r + ur - x @ ur, 0.0)
        reg_c = np.maximum(reg_c + uc - y @ uc, 0.0)
        x = reg_r / reg_r.sum() if reg_r.sum() > 0 else np.full(n, 1.0 / n)
        y = reg_c / reg_c.sum() if reg_c.sum() > 0 else np.full(k, 1.0 / k)
        avg_r += t * x
        avg_c += t * y
    return avg_r / avg_r.sum(), avg_c / avg_c.sum()


def solve_zero_sum_ne(m: np.ndarray) -> Tuple[np.ndarray, np.ndarray, float]:
    """
    (sigma_row, sigma_col, value) for the zero-sum game where the row player
    receives m. Solved as two minimax LPs with HiGHS; regret matching is used
    for very large matrices or when the LP fails.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.size == 0 or not np.all(np.isfinite(m)):
        raise MetaGameError("meta payoff matrix must be a finite, non-empty 2D array")
    row = col = None
    if m.size <= LP_MAX_ENTRIES:
        row = _maximin_lp(m)
        col = _maximin_lp(-m.T)
    if row is None or col is None:
        row, col = regret_matching(m)
    value = float(row @ m @ col)
    scale = max(1.0, float(np.max(np.abs(m))))
    gap = ne_gap(m, row, col)
    if gap > NE_TOL * scale:
        log.warning("meta-NE certificate %.3e exceeds tolerance %.1e", gap, NE_TOL * scale)
    return row, col, value


def rectified_weights(m: np.ndarray, sigma_row: np.ndarray, sigma_col: np.ndarray,
                      k: int) -> np.ndarray:
    """
    Opponent weights for the rectified-Nash response of row member k:
    sigma_col restricted to the columns k beats or ties, renormalized;
    sigma_col itself when nothing is left.
    """
    m = np.asarray(m, dtype=float)
    sigma_row = np.asarray(sigma_row, dtype=float)
    sigma_col = np.asarray(sigma_col, dtype=float)
    if not 0 <= k < m.shape[0] or sigma_row[k] <= 0:
        raise MetaGameError(f"row {k} is outside the meta-strategy support")
    w = sigma_col * (m[k] >= 0)
    total = w.sum()
    if total <= 0:
        return sigma_col.copy()
    return w / total


# -- persistence ---------------------------------------------------------------

def format_meta_game(meta: MetaGame) -> str:
    text = format_matrix(meta.payoffs)
    if meta.ne is not None:
        text += "# ne_row " + " ".join(repr(float(v)) for v in meta.ne.row) + "\n"
        text += "# ne_col " + " ".join(repr(float(v)) for v in meta.ne.col) + "\n"
        text += f"# value {float(meta.ne.value)!r}\n"
    return text


def save_meta_game(meta: MetaGame, path: Path, member_ids: Optional[Sequence[Iterable[str]]] = None) -> None:
    """meta.txt (matrix plus '#' NE lines) and a members.txt sidecar next to it."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as f:
        f.write(format_meta_game(meta))
    if member_ids is not None:
        lines: List[str] = []
        for player, ids in zip((1, 2), member_ids):
            lines += [f"{player} {k} {mid}" for k, mid in enumerate(ids)]
        with (path.parent / "members.txt").open("w", encoding="utf-8", newline="\n") as f:
            f.write("\n".join(lines) + "\n")


def read_meta_ne(path: Path) -> Optional[MetaNE]:
    row = col = value = None
    for line in path.read_text(encoding="utf-8").splitlines():
        fields = line.split()
        if len(fields) < 2 or fields[0] != "#":
            continue
        if fields[1] == "ne_row":
            row = np.array([float(v) for v in fields[2:]])
        elif fields[1] == "ne_col":
            col = np.array([float(v) for v in fields[2:]])
        elif fields[1] == "value":
            value = float(fields[2])
    if row is None or col is None or value is None:
        return None
    return MetaNE(row, col, value)
