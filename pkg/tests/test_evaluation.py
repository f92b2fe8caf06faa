import itertools

import numpy as np
import pytest

from src.psd_psro.errors import PsdPsroError
from src.psd_psro.evaluation import (best_response, exploitability, gamescape_distance,
                                     gamescape_projection, outcome_probabilities, pe_terms,
                                     population_exploitability)
from src.psd_psro.games import expected_utility
from src.psd_psro.policy import BehavioralPolicy, MixedPolicy, Population, pure_policy, random_policy

from helpers import kuhn_equilibrium, rps_pure


def test_best_response_to_rock_is_paper(rps):
    policy, value = best_response(rps, rps_pure(rps, 2, "R"), 1)
    assert policy.distribution("row").tolist() == [0.0, 1.0, 0.0]
    assert value == 1.0


def test_best_response_ties_pick_the_first_action(rps):
    policy, value = best_response(rps, BehavioralPolicy.uniform(rps, 2), 1)
    assert policy.distribution("row").tolist() == [1.0, 0.0, 0.0]
    assert value == pytest.approx(0.0)


def test_kuhn_best_response_matches_enumeration(kuhn):
    opponent = BehavioralPolicy.uniform(kuhn, 2)
    index = kuhn.index(1)
    best = -np.inf
    for choice in itertools.product(("p", "b"), repeat=len(index)):
        pure = pure_policy(kuhn, 1, {s.id: a for s, a in zip(index.states, choice)})
        best = max(best, expected_utility(kuhn, pure, opponent))
    _, value = best_response(kuhn, opponent, 1)
    assert value == pytest.approx(best, abs=1e-12)


def test_best_response_of_player_two_is_signed(kuhn, rng):
    pi1 = random_policy(kuhn, 1, rng)
    br, value = best_response(kuhn, pi1, 2)
    assert value == pytest.approx(-expected_utility(kuhn, pi1, br), abs=1e-12)


def test_kuhn_equilibrium_is_unexploitable(kuhn):
    p1, p2 = kuhn_equilibrium(kuhn)
    assert exploitability(kuhn, p1, p2) == pytest.approx(0.0, abs=1e-12)


def test_exploitability_of_rock_vs_rock(rps):
    assert exploitability(rps, rps_pure(rps, 1, "R"), rps_pure(rps, 2, "R")) == pytest.approx(1.0)


def test_exploitability_accepts_mixtures(rps):
    row = Population(1, tuple(rps_pure(rps, 1, a) for a in "RPS"))
    col = Population(2, tuple(rps_pure(rps, 2, a) for a in "RPS"))
    assert exploitability(rps, MixedPolicy.uniform(row), MixedPolicy.uniform(col)) == pytest.approx(0.0, abs=1e-12)


def test_singleton_population_exploitability_is_exploitability(kuhn, rng):
    eps = 1e-6
    for _ in range(50):
        pi1, pi2 = random_policy(kuhn, 1, rng), random_policy(kuhn, 2, rng)
        pe = population_exploitability(kuhn, Population(1, (pi1,)), Population(2, (pi2,)), eps)
        assert abs(pe - exploitability(kuhn, pi1, pi2)) <= 2 * eps


def test_full_rps_populations_have_zero_pe(rps):
    row = Population(1, tuple(rps_pure(rps, 1, a) for a in "RPS"))
    col = Population(2, tuple(rps_pure(rps, 2, a) for a in "RPS"))
    assert population_exploitability(rps, row, col) == pytest.approx(0.0, abs=1e-6)


def test_pe_terms_of_rock_and_paper(rps):
    # player 1 holds {R, P} against player 2's {R}
    row = Population(1, (rps_pure(rps, 1, "R"), rps_pure(rps, 1, "P")))
    col = Population(2, (rps_pure(rps, 2, "R"),))
    terms = pe_terms(rps, row, col)
    assert terms.unrestricted_p1 == pytest.approx(1.0)
    # maximin of the {R, P} rows: r = 1/3 on rock
    assert terms.restricted_p1 == pytest.approx(-1 / 3, abs=1e-6)
    assert terms.pe == pytest.approx(0.5 * (1.0 + 1 / 3), abs=1e-6)


def test_pe_needs_positive_tolerance(rps):
    pop1 = Population(1, (rps_pure(rps, 1, "R"),))
    pop2 = Population(2, (rps_pure(rps, 2, "R"),))
    with pytest.raises(PsdPsroError):
        pe_terms(rps, pop1, pop2, eps=0.0)


def test_gamescape_point_inside_hull():
    m = np.array([[0.0, -1.0], [1.0, 0.0]])
    proj = gamescape_projection(m, np.array([0.5, -0.5]))
    assert proj.distance == pytest.approx(0.0, abs=1e-6)
    assert proj.weights == pytest.approx([0.5, 0.5], abs=1e-5)


def test_gamescape_point_outside_hull():
    m = np.array([[0.0, 0.0], [1.0, 0.0]])
    assert gamescape_distance(m, np.array([0.5, 1.0])) == pytest.approx(1.0, abs=1e-6)
    assert gamescape_distance(m, np.array([2.0, 0.0])) == pytest.approx(1.0, abs=1e-6)


def test_gamescape_shape_mismatch():
    with pytest.raises(PsdPsroError):
        gamescape_distance(np.eye(2), np.zeros(3))


def test_outcome_probabilities(rps):
    assert outcome_probabilities(rps, rps_pure(rps, 1, "P"), rps_pure(rps, 2, "R")) == (1.0, 0.0, 0.0)
    win, draw, loss = outcome_probabilities(rps, BehavioralPolicy.uniform(rps, 1), rps_pure(rps, 2, "R"))
    assert (win, draw, loss) == pytest.approx((1 / 3, 1 / 3, 1 / 3))


def test_pe_never_grows_with_the_populations(kuhn, rng):
    eps = 1e-6
    pops = [Population(1, (random_policy(kuhn, 1, rng),)), Population(2, (random_policy(kuhn, 2, rng),))]
    pe = [pe_terms(kuhn, pops[0], pops[1], eps).pe]
    for _ in range(8):
        side = int(rng.integers(0, 2))
        member = random_policy(kuhn, side + 1, rng)
        pops[side] = pops[side].extended(member)
        pe.append(pe_terms(kuhn, pops[0], pops[1], eps).pe)
    assert all(b <= a + 2 * eps for a, b in zip(pe, pe[1:]))


def test_pe_matches_a_grid_over_two_member_hulls(rps, rng):
    grid = np.linspace(0.0, 1.0, 2001)
    for _ in range(5):
        pop1 = Population(1, (random_policy(rps, 1, rng), random_policy(rps, 1, rng)))
        pop2 = Population(2, (random_policy(rps, 2, rng), random_policy(rps, 2, rng)))
        v1 = min(best_response(rps, MixedPolicy(pop2, [q, 1 - q]), 1)[1] for q in grid)
        v2 = min(best_response(rps, MixedPolicy(pop1, [q, 1 - q]), 2)[1] for q in grid)
        pe = pe_terms(rps, pop1, pop2).pe
        # the grid can only overshoot each minimum
        assert pe <= 0.5 * (v1 + v2) + 2e-6
        assert pe >= 0.5 * (v1 + v2) - 2e-3
