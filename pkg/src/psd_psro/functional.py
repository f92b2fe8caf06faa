"""
Two-dimensional functional games: a policy is a point in the plane.

mixture7: seven Gaussian humps on a circle. A point p is mapped to the
normalized vector of hump likelihoods w(p), and

    f(p, q) = w(p)^T S w(q) + 1/2 * sum_k (w_k(p) - w_k(q))

with S the cyclic matrix where each hump beats the next three and loses to
the previous three. Both w vectors sum to one, so the transitive term
cancels for normalized weights; it is kept in the formula.

disc: points in the closed unit disc, f(p, q) = p1 q2 - p2 q1.

Both payoffs are antisymmetric, so player 2's utility for point q against
player 1's p is f(q, p) and every routine below is written for "my point
against theirs".
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize
from scipy.special import rel_entr, softmax

from .errors import GameError, PolicyError

log = logging.getLogger(__name__)

HUMPS = 7
DISC_TOL = 1e-12
VARIANTS = ("mixture7", "disc")


def cyclic_dominance_matrix(n: int = HUMPS) -> np.ndarray:
    """Row i: +1 against the next (n-1)/2 columns cyclically, -1 against the previous ones."""
    s = np.zeros((n, n))
    half = (n - 1) // 2
    for i in range(n):
        for k in range(1, half + 1):
            s[i, (i + k) % n] = 1.0
            s[i, (i - k) % n] = -1.0
    return s


@dataclass(frozen=True, eq=False)
class PointPolicy:
    player: int
    xy: np.ndarray

    def __post_init__(self):
        xy = np.array(self.xy, dtype=float).reshape(2)
        if not np.all(np.isfinite(xy)):
            raise GameError("point policy must be finite")
        xy.setflags(write=False)
        object.__setattr__(self, "xy", xy)

    def __repr__(self) -> str:
        return f"PointPolicy({self.player}, ({self.xy[0]:.6g}, {self.xy[1]:.6g}))"


@dataclass(frozen=True, eq=False)
class FunctionalGame2D:
    variant: str = "mixture7"
    radius: float = 2.0
    scale: Optional[float] = None
    centers: np.ndarray = field(init=False, repr=False)
    S: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise GameError(f"functional game must be one of {VARIANTS}, got {self.variant!r}")
        if self.radius <= 0:
            raise GameError("hump radius must be > 0")
        # sigma defaults to half the distance between neighbouring humps
        scale = self.scale if self.scale is not None else self.radius * math.sin(math.pi / HUMPS)
        if scale <= 0:
            raise GameError("hump scale must be > 0")
        angles = 2.0 * np.pi * np.arange(HUMPS) / HUMPS
        centers = self.radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
        s = cyclic_dominance_matrix(HUMPS)
        for arr in (centers, s):
            arr.setflags(write=False)
        object.__setattr__(self, "scale", float(scale))
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "S", s)

    @property
    def name(self) -> str:
        return self.variant

    @property
    def bound(self) -> float:
        """Half-width of the search box used by continuous best responses."""
        return 1.0 if self.variant == "disc" else 2.0 * self.radius

    def check_point(self, p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float).reshape(2)
        if self.variant == "disc" and float(p @ p) > 1.0 + DISC_TOL:
            raise GameError(f"point ({p[0]:.6g}, {p[1]:.6g}) lies outside the unit disc")
        return p


def hump_weights(game: FunctionalGame2D, p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float).reshape(2)
    logits = -np.sum((p - game.centers) ** 2, axis=1) / (2.0 * game.scale ** 2)
    return softmax(logits)


def hump_jacobian(game: FunctionalGame2D, p: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(w, dw/dp) with dw_k/dp = w_k (c_k - c_bar) / sigma^2, c_bar = sum_j w_j c_j."""
    w = hump_weights(game, p)
    c_bar = w @ game.centers
    jac = w[:, None] * (game.centers - c_bar) / game.scale ** 2
    return w, jac


def functional_payoff(game: FunctionalGame2D, p: np.ndarray, q: np.ndarray) -> float:
    p = game.check_point(p)
    q = game.check_point(q)
    if game.variant == "disc":
        return float(p[0] * q[1] - p[1] * q[0])
    wp = hump_weights(game, p)
    wq = hump_weights(game, q)
    return float(wp @ game.S @ wq + 0.5 * np.sum(wp - wq))


def mixture_payoff(game: FunctionalGame2D, p: np.ndarray,
                   points: Sequence[np.ndarray], weights: np.ndarray) -> float:
    return float(sum(w * functional_payoff(game, p, q) for w, q in zip(weights, points) if w > 0))


def _payoff_direction(game: FunctionalGame2D, points: Sequence[np.ndarray],
                      weights: np.ndarray) -> np.ndarray:
    """Linear part of the payoff against a mixture: disc -> vector in the plane, mixture7 -> S w_bar."""
    weights = np.asarray(weights, dtype=float)
    if game.variant == "disc":
        pts = np.array([np.asarray(q, dtype=float) for q in points])
        return np.array([weights @ pts[:, 1], -(weights @ pts[:, 0])])
    w_bar = sum(w * hump_weights(game, q) for w, q in zip(weights, points))
    return game.S @ w_bar


def payoff_gradient(game: FunctionalGame2D, p: np.ndarray, points: Sequence[np.ndarray],
                    weights: np.ndarray) -> Tuple[float, np.ndarray]:
    """Value and gradient in p of sum_k weights_k f(p, points_k)."""
    p = np.asarray(p, dtype=float).reshape(2)
    direction = _payoff_direction(game, points, weights)
    if game.variant == "disc":
        return float(direction @ p), direction
    w, jac = hump_jacobian(game, p)
    # the transitive term is zero for normalized weights
    return float(w @ direction), jac.T @ direction


def project_to_domain(game: FunctionalGame2D, p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float).reshape(2)
    if game.variant == "disc":
        n = float(np.linalg.norm(p))
        return p / n if n > 1.0 else p
    b = game.bound
    return np.clip(p, -b, b)


def functional_best_response(game: FunctionalGame2D, points: Sequence[np.ndarray],
                             weights: np.ndarray, restarts: int = 4,
                             rng: Optional[np.random.Generator] = None) -> Tuple[np.ndarray, float]:
    """
    Best point against a mixture of opponent points.

    disc is linear in p, so the answer is the unit vector along the payoff
    direction. mixture7 uses L-BFGS-B from every hump center, the origin and
    `restarts` random points in the search box.
    """
    direction = _payoff_direction(game, points, weights)
    if game.variant == "disc":
        n = float(np.linalg.norm(direction))
        if n == 0.0:
            return np.array([1.0, 0.0]), 0.0
        return direction / n, n

    b = game.bound
    rng = rng if rng is not None else np.random.default_rng(0)
    starts = [c for c in game.centers] + [np.zeros(2)]
    starts += [rng.uniform(-b, b, size=2) for _ in range(restarts)]

    def neg(p):
        value, grad = payoff_gradient(game, p, points, weights)
        return -value, -grad

    best_p, best_v = None, -np.inf
    for x0 in starts:
        res = optimize.minimize(neg, x0, jac=True, method="L-BFGS-B", bounds=[(-b, b), (-b, b)])
        if -res.fun > best_v + 1e-12:
            best_p, best_v = np.asarray(res.x, dtype=float), float(-res.fun)
    return best_p, best_v


# -- distances between points ------------------------------------------------

def hull_point(game: FunctionalGame2D, points: Sequence[np.ndarray], alpha: np.ndarray) -> np.ndarray:
    """
    Image of a hull mixture in the space the distance is measured in:
    hump weights for mixture7, the plane itself for disc.
    """
    alpha = np.asarray(alpha, dtype=float)
    if game.variant == "disc":
        return np.asarray(alpha @ np.array([np.asarray(q, dtype=float) for q in points]))
    return sum(a * hump_weights(game, q) for a, q in zip(alpha, points))


def point_distance(game: FunctionalGame2D, p: np.ndarray, target: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Bregman distance from p to a hull image and its gradient in p: squared
    Euclidean (halved) for disc, KL(w(p) || target) for mixture7.
    """
    p = np.asarray(p, dtype=float).reshape(2)
    if game.variant == "disc":
        diff = p - target
        return 0.5 * float(diff @ diff), diff
    w, jac = hump_jacobian(game, p)
    target = np.clip(target, 1e-300, None)
    kl = float(np.sum(rel_entr(w, target)))
    return kl, jac.T @ (np.log(np.clip(w, 1e-300, None) / target) + 1.0)


# -- persistence: one "x y" line per population member -----------------------

def save_points(points: Sequence[PointPolicy], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as f:
        for pt in points:
            f.write(f"{float(pt.xy[0])!r} {float(pt.xy[1])!r}\n")


def load_points(player: int, path: Path) -> List[PointPolicy]:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise PolicyError(f"cannot read points: {e}", path) from e
    points = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        try:
            if len(fields) != 2:
                raise ValueError
            points.append(PointPolicy(player, np.array([float(fields[0]), float(fields[1])])))
        except (ValueError, GameError):
            raise PolicyError(f"line {line_no}: expected two finite coordinates", path) from None
    if not points:
        raise PolicyError("no points", path)
    return points
