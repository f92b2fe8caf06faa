import numpy as np
import pytest

from src.psd_psro.config import OracleConfig
from src.psd_psro.diversity import floor_support, psd_distance_exact, weighting_opponent
from src.psd_psro.functional import FunctionalGame2D, PointPolicy
from src.psd_psro.oracle import (OracleObjective, PolicyParams, build_objective, exact_br_oracle,
                                 objective_value, psd_oracle_exact, psd_oracle_point,
                                 psd_oracle_reinforce, reinforce_gradient, segment_softmax,
                                 softmax_chain)
from src.psd_psro.policy import BehavioralPolicy, MixedPolicy, Population, random_policy

from helpers import rps_pure


def rps_column(rps, probs):
    return BehavioralPolicy.from_mapping(rps, 2, {"col": probs})


def test_segment_softmax_normalizes_each_state(kuhn, rng):
    index = kuhn.index(1)
    probs = segment_softmax(index, rng.normal(size=index.n_sequences))
    assert probs[0] == 1.0
    sums = np.add.reduceat(probs[1:], index.offsets - 1)
    assert sums == pytest.approx(np.ones(len(index)))


def test_softmax_chain_matches_finite_differences(rps):
    index = rps.index(1)
    z = np.array([0.0, 0.3, -0.2, 0.5])
    g = np.array([0.0, 1.0, -2.0, 0.5])
    analytic = softmax_chain(index, segment_softmax(index, z), g)
    h = 1e-6
    for i in range(1, 4):
        e = np.zeros(4)
        e[i] = h
        numeric = (g @ segment_softmax(index, z + e) - g @ segment_softmax(index, z - e)) / (2 * h)
        assert analytic[i] == pytest.approx(numeric, abs=1e-8)


def test_objective_of_paper_against_rock(rps):
    # floored rock: (1, 0.001, 0.001) / 1.002, so KL(paper || target) = log(1002)
    cfg = OracleConfig(lam=1.0, support_floor=1e-3)
    population = Population(1, (rps_pure(rps, 1, "R"),))
    value = objective_value(rps, rps_pure(rps, 1, "P"), rps_pure(rps, 2, "R"), population, cfg,
                            np.random.default_rng(0))
    assert value == pytest.approx(1.0 + np.log(1002.0), abs=1e-12)


def test_zero_lambda_objective_is_utility(kuhn, rng):
    pi1, pi2 = random_policy(kuhn, 1, rng), random_policy(kuhn, 2, rng)
    objective = build_objective(kuhn, pi2, Population(1, (pi1,)), OracleConfig(lam=0.0))
    parts = objective.evaluate(pi1)
    assert parts.distance == 0.0
    assert parts.objective == parts.utility


def test_exact_gradient_matches_finite_differences(kuhn, rng):
    population = Population(1, (random_policy(kuhn, 1, rng), random_policy(kuhn, 1, rng)))
    opponent = random_policy(kuhn, 2, rng)
    cfg = OracleConfig(lam=0.7, mode="exact-gradient", support_floor=1e-3)
    objective = build_objective(kuhn, opponent, population, cfg, np.random.default_rng(3))
    params = PolicyParams(1, kuhn.index(1), rng.normal(size=kuhn.index(1).n_sequences))
    parts, grad = objective.gradient(params.policy())
    k = parts.argmin
    h = 1e-5
    for i in range(1, len(grad)):
        e = np.zeros(len(grad))
        e[i] = h
        plus = objective.evaluate(params.step(e, 1.0).policy(), argmin=k).objective
        minus = objective.evaluate(params.step(-e, 1.0).policy(), argmin=k).objective
        assert grad[i] == pytest.approx((plus - minus) / (2 * h), rel=1e-4, abs=1e-7)


def test_player_two_gradient_matches_finite_differences(kuhn, rng):
    population = Population(2, (random_policy(kuhn, 2, rng),))
    opponent = random_policy(kuhn, 1, rng)
    objective = build_objective(kuhn, opponent, population, OracleConfig(lam=0.3),
                                np.random.default_rng(5))
    params = PolicyParams(2, kuhn.index(2), rng.normal(size=kuhn.index(2).n_sequences))
    parts, grad = objective.gradient(params.policy())
    h = 1e-5
    for i in range(1, len(grad)):
        e = np.zeros(len(grad))
        e[i] = h
        plus = objective.evaluate(params.step(e, 1.0).policy(), argmin=parts.argmin).objective
        minus = objective.evaluate(params.step(-e, 1.0).policy(), argmin=parts.argmin).objective
        assert grad[i] == pytest.approx((plus - minus) / (2 * h), rel=1e-4, abs=1e-7)


def test_exact_br_oracle(rps):
    br = exact_br_oracle(rps, rps_pure(rps, 2, "R"))
    assert br.player == 1
    assert br.distribution("row").tolist() == [0.0, 1.0, 0.0]


def test_unregularized_ascent_reaches_best_response_value(rps):
    opponent = rps_column(rps, [0.5, 0.3, 0.2])
    cfg = OracleConfig(lam=0.0, learning_rate=50.0, steps=500, mode="exact-gradient")
    result = psd_oracle_exact(rps, opponent, Population(1, (rps_pure(rps, 1, "R"),)), cfg)
    # paper earns 0.5 - 0.2 = 0.3
    assert result.utility == pytest.approx(0.3, abs=1e-3)
    assert result.policy.distribution("row")[1] > 0.99


def test_ascent_progress_is_monotone(kuhn, rng):
    population = Population(1, (random_policy(kuhn, 1, rng),))
    opponent = random_policy(kuhn, 2, rng)
    cfg = OracleConfig(lam=0.5, learning_rate=2.0, steps=40, mode="exact-gradient")
    seen = []
    psd_oracle_exact(kuhn, opponent, population, cfg, rng=np.random.default_rng(1),
                     progress=lambda step, parts, gnorm: seen.append(parts.objective))
    assert len(seen) > 1
    assert all(b >= a for a, b in zip(seen, seen[1:]))


def test_diversity_pushes_away_from_the_population(rps):
    start = BehavioralPolicy.from_mapping(rps, 1, {"row": [0.5, 0.3, 0.2]})
    population = Population(1, (start,))
    uniform = BehavioralPolicy.uniform(rps, 2)
    weighting = weighting_opponent(rps, uniform, 0.01)
    target = floor_support(start, 1e-3)

    plain = psd_oracle_exact(rps, uniform, population, OracleConfig(lam=0.0, steps=50))
    diverse = psd_oracle_exact(rps, uniform, population,
                               OracleConfig(lam=1.0, learning_rate=5.0, steps=100),
                               rng=np.random.default_rng(0))
    # a uniform opponent makes every action worth zero, so only the distance moves the policy
    assert plain.policy.probs == pytest.approx(uniform.probs, abs=1e-12)
    assert diverse.utility == pytest.approx(0.0, abs=1e-12)
    assert diverse.distance == pytest.approx(psd_distance_exact(rps, diverse.policy, target, weighting))
    # scissors is the least likely action of the population member
    assert diverse.distance > 1.0
    assert int(np.argmax(diverse.policy.distribution("row"))) == 2


def test_zero_learning_rate_keeps_the_initial_policy(kuhn, rng):
    init = random_policy(kuhn, 1, rng)
    opponent = random_policy(kuhn, 2, rng)
    population = Population(1, (init,))
    cfg = OracleConfig(lam=0.5, learning_rate=0.0, steps=5, episodes=8, mode="reinforce")
    exact = psd_oracle_exact(kuhn, opponent, population, cfg, init=init, rng=np.random.default_rng(0))
    sampled = psd_oracle_reinforce(kuhn, opponent, population, cfg, np.random.default_rng(0), init=init)
    assert exact.policy.probs == pytest.approx(init.probs, abs=1e-12)
    assert sampled.policy.probs == pytest.approx(init.probs, abs=1e-12)


@pytest.mark.slow
def test_reinforce_gradient_is_unbiased(rps):
    policy = BehavioralPolicy.from_mapping(rps, 1, {"row": [0.5, 0.3, 0.2]})
    opponent = rps_column(rps, [0.2, 0.3, 0.5])
    target = floor_support(rps_pure(rps, 1, "S"), 1e-2)
    weighting = weighting_opponent(rps, opponent, 0.01)
    objective = OracleObjective(rps, 1, opponent, 0.8, [target], weighting)
    _, exact = objective.gradient(policy, argmin=0)
    est = reinforce_gradient(rps, policy, opponent, 100000, np.random.default_rng(11), lam=0.8,
                             target=target, weighting=weighting)
    assert np.all(np.abs(est.mean - exact) <= 4 * est.stderr + 1e-9)


@pytest.mark.slow
def test_reinforce_follows_the_exact_objective_on_a_tree(kuhn):
    rng = np.random.default_rng(4)
    policy = random_policy(kuhn, 1, rng)
    opponent = random_policy(kuhn, 2, rng)
    target = floor_support(random_policy(kuhn, 1, rng), 1e-2)
    weighting = weighting_opponent(kuhn, opponent, 0.01)
    objective = OracleObjective(kuhn, 1, opponent, 0.8, [target], weighting)
    parts, exact = objective.gradient(policy, argmin=0)
    # KL rollouts against the weighting opponent estimate the same visit-weighted distance
    est = reinforce_gradient(kuhn, policy, opponent, 100000, np.random.default_rng(12), lam=0.8,
                             target=target, weighting=weighting, share_rollouts=False)
    assert np.all(np.abs(est.mean - exact) <= 4 * est.stderr + 1e-6)
    assert est.mean_kl == pytest.approx(parts.distance, rel=0.02)


def test_reinforce_learns_to_beat_rock(rps):
    cfg = OracleConfig(lam=0.0, learning_rate=0.5, steps=200, episodes=64, mode="reinforce")
    result = psd_oracle_reinforce(rps, rps_pure(rps, 2, "R"), Population(1, (rps_pure(rps, 1, "R"),)),
                                  cfg, np.random.default_rng(2))
    assert result.policy.distribution("row")[1] > 0.9


def test_point_oracle_on_the_disc():
    game = FunctionalGame2D("disc")
    opponent = MixedPolicy(Population(2, (PointPolicy(2, [0.6, 0.0]),)), [1.0])
    population = Population(1, (PointPolicy(1, [1.0, 0.0]),))
    cfg = OracleConfig(lam=0.0, learning_rate=0.1, steps=300)
    result = psd_oracle_point(game, opponent, population, cfg, np.random.default_rng(0))
    assert result.utility == pytest.approx(0.6, abs=1e-3)
    assert result.policy.xy == pytest.approx([0.0, -1.0], abs=1e-2)
