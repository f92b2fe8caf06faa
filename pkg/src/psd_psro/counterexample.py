"""
Two small matrix games where adding a policy that strictly enlarges the
gamescape leaves the population more exploitable than adding one that
stays inside it. Population exploitability is the better yardstick.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List

import numpy as np

from .evaluation import gamescape_distance, population_exploitability
from .games import MatrixGame, matrix_tree
from .meta_solver import fill_payoff_matrix
from .policy import BehavioralPolicy, Population, pure_policy

log = logging.getLogger(__name__)

GAMESCAPE_TOL = 1e-6

EXTENDED_RPS = MatrixGame(
    np.array([[0.0, -1.0, 1.0],
              [1.0, 0.0, -1.0],
              [-1.0, 1.0, 0.0],
              [1.0, -1.0, 1.0],
              [1.0, 1.0, -1.0],
              [-1.0, 1.0, 1.0]]),
    ("R", "P", "S", "R'", "P'", "S'"), ("R", "P", "S"))

SYMMETRIC_GAME = MatrixGame(
    np.array([[0.0, -1.0, -0.5, -1.0, -4.0],
              [1.0, 0.0, 0.5, -1.0, -4.0],
              [0.5, -0.5, 0.0, 0.0, 4.0],
              [1.0, 1.0, 0.0, 0.0, -4.0],
              [4.0, 4.0, -4.0, 4.0, 0.0]]),
    ("A", "B", "C", "D", "E"), ("A", "B", "C", "D", "E"))


@dataclass(frozen=True)
class CounterexampleReport:
    name: str
    # PE after adding the in-hull policy / the hull-enlarging policy
    pe_inside: float
    pe_outside: float
    # gamescape distance of each added policy's payoff vector to the base population's hull
    inside_distance: float
    outside_distance: float
    target: float
    tol: float

    @property
    def difference(self) -> float:
        return self.pe_inside - self.pe_outside

    @property
    def reproduced(self) -> bool:
        return (self.inside_distance <= GAMESCAPE_TOL
                and self.outside_distance > GAMESCAPE_TOL
                and self.difference < 0
                and abs(self.difference - self.target) <= self.tol)

    def lines(self) -> List[str]:
        verdict = "reproduced" if self.reproduced else "NOT reproduced"
        return [
            f"{self.name}:",
            f"  gamescape distance of the in-hull policy:   {self.inside_distance:.6f}",
            f"  gamescape distance of the enlarging policy: {self.outside_distance:.6f}",
            f"  PE with in-hull policy:   {self.pe_inside:.6f}",
            f"  PE with enlarging policy: {self.pe_outside:.6f}",
            f"  difference {self.difference:+.4f} (expected {self.target:+.2f} +/- {self.tol}) -> {verdict}",
        ]


def _compare(name: str, game: MatrixGame, base: List[BehavioralPolicy], inside: BehavioralPolicy,
             outside: BehavioralPolicy, opponents: List[BehavioralPolicy],
             target: float, tol: float) -> CounterexampleReport:
    tree = matrix_tree(game, name)
    opp = Population(2, tuple(opponents))
    base_pop = Population(1, tuple(base))
    m = fill_payoff_matrix(tree, base_pop, opp).payoffs
    extra = fill_payoff_matrix(tree, Population(1, (inside, outside)), opp).payoffs
    pe_in = population_exploitability(tree, base_pop.extended(inside), opp)
    pe_out = population_exploitability(tree, base_pop.extended(outside), opp)
    report = CounterexampleReport(name, pe_in, pe_out, gamescape_distance(m, extra[0]),
                                  gamescape_distance(m, extra[1]), target, tol)
    log.info("%s: PE %.6f vs %.6f", name, pe_in, pe_out)
    return report


def asymmetric_example() -> CounterexampleReport:
    """
    Rock-paper-scissors with three extra row strategies. The opponent holds
    {R, P, R/P mix}; the row population {S, R', P'} gains either S' (inside
    its gamescape) or the R/R' mix (outside it).
    """
    tree = matrix_tree(EXTENDED_RPS, "extended-rps")

    def row(label):
        return pure_policy(tree, 1, {"row": label})

    opponents = [pure_policy(tree, 2, {"col": "R"}), pure_policy(tree, 2, {"col": "P"}),
                 BehavioralPolicy.from_mapping(tree, 2, {"col": [0.5, 0.5, 0.0]})]
    mix = BehavioralPolicy.from_mapping(tree, 1, {"row": [0.5, 0.0, 0.0, 0.5, 0.0, 0.0]})
    return _compare("asymmetric", EXTENDED_RPS, [row("S"), row("R'"), row("P'")], row("S'"), mix,
                    opponents, target=-0.07, tol=0.01)


def symmetric_example() -> CounterexampleReport:
    """
    Symmetric 5x5 game, opponent population {A, B}. Adding C keeps the row
    gamescape; adding D enlarges it but leaves E's exploit untouched.
    """
    tree = matrix_tree(SYMMETRIC_GAME, "symmetric")

    def pure(player, label):
        return pure_policy(tree, player, {"row" if player == 1 else "col": label})

    return _compare("symmetric", SYMMETRIC_GAME, [pure(1, "A"), pure(1, "B")], pure(1, "C"),
                    pure(1, "D"), [pure(2, "A"), pure(2, "B")], target=-1.83, tol=0.02)


def reproduce() -> List[CounterexampleReport]:
    return [asymmetric_example(), symmetric_example()]
