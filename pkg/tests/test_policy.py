import numpy as np
import pytest

from src.psd_psro.errors import PolicyError
from src.psd_psro.games import expected_utility
from src.psd_psro.policy import (BehavioralPolicy, MixedPolicy, Population, blend_uniform,
                                 episode_sampler, format_policy, load_policy, mixture_sequence_form,
                                 mixture_to_behavioral, parse_policy, pure_policy, random_policy,
                                 sample_hull, save_policy, sequence_to_behavioral, to_sequence_form)

from helpers import rps_pure


def test_sequence_form_is_consistent(kuhn, rng):
    for player in (1, 2):
        seq = to_sequence_form(kuhn, random_policy(kuhn, player, rng))
        assert seq.x[0] == 1.0
        assert seq.consistency_error() < 1e-12


def test_sequence_form_round_trip_on_reached_states(kuhn, rng):
    pi = random_policy(kuhn, 1, rng)
    back = sequence_to_behavioral(kuhn, to_sequence_form(kuhn, pi))
    assert np.allclose(back.probs, pi.probs, atol=1e-12)


def test_unreached_states_become_uniform(kuhn):
    # always betting first never reaches "K/pb"
    pi = pure_policy(kuhn, 1, {"J/": "b", "Q/": "b", "K/": "b"})
    back = sequence_to_behavioral(kuhn, to_sequence_form(kuhn, pi))
    assert back.distribution("K/pb").tolist() == [0.5, 0.5]
    assert back.distribution("K/").tolist() == [0.0, 1.0]


def test_mixture_sequence_form_is_linear(kuhn, rng):
    for _ in range(100):
        player = int(rng.integers(1, 3))
        a = random_policy(kuhn, player, rng)
        b = random_policy(kuhn, player, rng)
        alpha = float(rng.random())
        mix = MixedPolicy(Population(player, (a, b)), [alpha, 1.0 - alpha])
        expected = alpha * to_sequence_form(kuhn, a).values + (1 - alpha) * to_sequence_form(kuhn, b).values
        assert np.max(np.abs(mixture_sequence_form(kuhn, mix).values - expected)) <= 1e-9


def test_mixture_realization_keeps_payoffs(kuhn, rng):
    a, b = random_policy(kuhn, 1, rng), random_policy(kuhn, 1, rng)
    opp = random_policy(kuhn, 2, rng)
    mix = MixedPolicy(Population(1, (a, b)), [0.3, 0.7])
    realized = mixture_to_behavioral(kuhn, mix)
    expected = 0.3 * expected_utility(kuhn, a, opp) + 0.7 * expected_utility(kuhn, b, opp)
    assert expected_utility(kuhn, realized, opp) == pytest.approx(expected, abs=1e-12)


def test_invalid_distribution_is_rejected(rps):
    index = rps.index(1)
    with pytest.raises(PolicyError, match="sums to"):
        BehavioralPolicy(1, index, np.array([1.0, 0.5, 0.2, 0.2]))
    with pytest.raises(PolicyError):
        BehavioralPolicy(1, index, np.array([1.0, 1.5, -0.5, 0.0]))


def test_mixture_weights_must_be_on_simplex(rps):
    pop = Population(1, (rps_pure(rps, 1, "R"), rps_pure(rps, 1, "P")))
    with pytest.raises(PolicyError):
        MixedPolicy(pop, [0.7, 0.7])


def test_population_rejects_other_player(rps):
    with pytest.raises(PolicyError):
        Population(1, (rps_pure(rps, 2, "R"),))


def test_sample_hull_vertices_first_and_prefix_stable(kuhn, rng):
    pop = Population(1, tuple(random_policy(kuhn, 1, rng) for _ in range(3)))
    small = sample_hull(pop, 5, np.random.default_rng(7))
    large = sample_hull(pop, 8, np.random.default_rng(7))
    assert len(small) == 5 and len(large) == 8
    for k in range(3):
        assert small[k].weights.tolist() == [1.0 if j == k else 0.0 for j in range(3)]
    for s, l in zip(small, large):
        assert np.array_equal(s.weights, l.weights)
    assert len(sample_hull(pop, 1, rng)) == 3


def test_blend_uniform_gives_full_support(rps):
    b = blend_uniform(rps, rps_pure(rps, 2, "R"), 0.01)
    assert b.distribution("col") == pytest.approx([0.99 + 0.01 / 3, 0.01 / 3, 0.01 / 3])


def test_policy_text_format(kuhn, rng, tmp_path):
    pi = random_policy(kuhn, 2, rng)
    text = format_policy(pi)
    assert text.splitlines()[0] == "# player 2"
    assert np.array_equal(parse_policy(kuhn, 2, text.splitlines()).probs, pi.probs)
    path = tmp_path / "p.txt"
    save_policy(pi, path)
    assert np.array_equal(load_policy(kuhn, 2, path).probs, pi.probs)


def test_corrupt_policy_file_names_the_file(kuhn, tmp_path):
    path = tmp_path / "broken.txt"
    path.write_text("# player 1\nJ/ 0.5 oops\n")
    with pytest.raises(PolicyError) as err:
        load_policy(kuhn, 1, path)
    assert "broken.txt" in str(err.value)


def test_missing_state_in_policy_file(kuhn, tmp_path):
    path = tmp_path / "short.txt"
    path.write_text("J/ 0.5 0.5\n")
    with pytest.raises(PolicyError, match="missing information state"):
        load_policy(kuhn, 1, path)


def test_episodes_follow_pure_policies(rps, rng):
    episodes = episode_sampler(rps).sample({1: rps_pure(rps, 1, "P"), 2: rps_pure(rps, 2, "R")}, rng, 50)
    assert all(ep.payoff == 1.0 for ep in episodes)
    assert all(ep.visits[1] == ((0, 2),) for ep in episodes)


class TopDraws:
    """Uniform draws pinned at 1.0, past any rounded cumulative total."""

    def random(self, n):
        return np.ones(n)


def test_draws_past_the_total_skip_zero_probability_actions(rps):
    row = BehavioralPolicy.from_mapping(rps, 1, {"row": [0.5, 0.5, 0.0]})
    episodes = episode_sampler(rps).sample({1: row, 2: rps_pure(rps, 2, "R")}, TopDraws(), 3)
    # paper against rock, never the zero-probability scissors
    assert all(ep.visits[1] == ((0, 2),) for ep in episodes)
    assert all(ep.payoff == 1.0 for ep in episodes)


def test_episode_mean_matches_expected_utility(kuhn, rng):
    pi1, pi2 = random_policy(kuhn, 1, rng), random_policy(kuhn, 2, rng)
    payoffs = np.array([ep.payoff for ep in episode_sampler(kuhn).sample({1: pi1, 2: pi2}, rng, 20000)])
    stderr = payoffs.std(ddof=1) / np.sqrt(len(payoffs))
    assert abs(payoffs.mean() - expected_utility(kuhn, pi1, pi2)) < 4 * stderr
