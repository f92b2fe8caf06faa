import itertools

import numpy as np
import pytest

from src.psd_psro.errors import GameError, MatrixFormatError
from src.psd_psro.games import (RPS, GameTree, Node, NodeKind, build_goofspiel, build_leduc,
                                expected_utility, load_matrix_game, matrix_tree,
                                save_matrix_game, validate_perfect_recall)
from src.psd_psro.meta_solver import solve_zero_sum_ne
from src.psd_psro.policy import (BehavioralPolicy, MixedPolicy, Population, mixture_to_behavioral,
                                 pure_policy, to_sequence_form)

from helpers import kuhn_equilibrium, rps_pure


def test_kuhn_layout(kuhn):
    for player in (1, 2):
        index = kuhn.index(player)
        assert len(index) == 6
        assert index.n_sequences == 13
    assert kuhn.index(1).state("K/pb").actions == ("p", "b")
    assert validate_perfect_recall(kuhn)


def test_kuhn_equilibrium_value(kuhn):
    p1, p2 = kuhn_equilibrium(kuhn)
    assert expected_utility(kuhn, p1, p2) == pytest.approx(-1 / 18, abs=1e-12)


def test_state_parents_precede_children(kuhn):
    for player in (1, 2):
        index = kuhn.index(player)
        for k, s in enumerate(index.states):
            if s.parent:
                assert index.seq_state[s.parent] < k


def test_utility_from_sequences_matches_expected_utility(kuhn, rng):
    from src.psd_psro.policy import random_policy
    pi1 = random_policy(kuhn, 1, rng)
    pi2 = random_policy(kuhn, 2, rng)
    x1 = to_sequence_form(kuhn, pi1).values
    x2 = to_sequence_form(kuhn, pi2).values
    # u_1 = sum over player-1 sequences of x1 * (player-1 signed sequence payoffs)
    assert float(x1 @ kuhn.sequence_payoffs(1, x2)) == pytest.approx(expected_utility(kuhn, pi1, pi2))
    assert float(x2 @ kuhn.sequence_payoffs(2, x1)) == pytest.approx(-expected_utility(kuhn, pi1, pi2))


def test_rps_as_tree(rps):
    assert expected_utility(rps, rps_pure(rps, 1, "P"), rps_pure(rps, 2, "R")) == 1.0
    assert expected_utility(rps, BehavioralPolicy.uniform(rps, 1), rps_pure(rps, 2, "S")) == 0.0


def test_goofspiel_uniform_self_play_is_even():
    game = build_goofspiel(3)
    assert validate_perfect_recall(game)
    u = expected_utility(game, BehavioralPolicy.uniform(game, 1), BehavioralPolicy.uniform(game, 2))
    assert u == pytest.approx(0.0, abs=1e-12)


def test_goofspiel_shuffled_prizes_add_chance():
    fixed = build_goofspiel(3)
    shuffled = build_goofspiel(3, "chance-shuffled")
    assert any(n.kind is NodeKind.CHANCE for n in shuffled.nodes)
    assert len(shuffled.index(1)) > len(fixed.index(1))


def test_leduc_has_perfect_recall():
    game = build_leduc()
    assert validate_perfect_recall(game)
    assert "K|-||" in game.index(1).by_id
    u = expected_utility(game, BehavioralPolicy.uniform(game, 1), BehavioralPolicy.uniform(game, 2))
    assert np.isfinite(u)


def test_rejects_imperfect_recall():
    # player 1 acts twice in the same state with different own histories
    leaf = Node(NodeKind.TERMINAL, payoff=0.0)
    nodes = [
        Node(NodeKind.DECISION, player=1, infostate="s", actions=("a", "b"), children=(1, 2)),
        Node(NodeKind.DECISION, player=1, infostate="s", actions=("a", "b"), children=(3, 4)),
        leaf, leaf, leaf,
    ]
    with pytest.raises(GameError):
        GameTree("bad", nodes)


def test_load_matrix_file(tmp_path):
    path = tmp_path / "m.txt"
    path.write_text("# comment\n2 3\n1 2 3\n4 5 6\n")
    game = load_matrix_game(path)
    assert game.payoffs.tolist() == [[1, 2, 3], [4, 5, 6]]
    tree = matrix_tree(game)
    assert len(tree.index(1).state("row").actions) == 2


def test_matrix_file_dimension_mismatch(tmp_path):
    path = tmp_path / "m.txt"
    path.write_text("2 2\n1 2\n3 4 5\n")
    with pytest.raises(MatrixFormatError) as err:
        load_matrix_game(path)
    assert err.value.line == 3
    assert "dimension mismatch" in str(err.value)


def test_matrix_file_non_numeric_entry(tmp_path):
    path = tmp_path / "m.txt"
    path.write_text("2 2\n1 2\n3 x\n")
    with pytest.raises(MatrixFormatError) as err:
        load_matrix_game(path)
    assert (err.value.line, err.value.column) == (3, 2)


def test_save_matrix_game_reloads(tmp_path):
    path = tmp_path / "rps.txt"
    save_matrix_game(RPS, path, comments=["rock paper scissors"])
    assert np.array_equal(load_matrix_game(path).payoffs, RPS.payoffs)


def test_leduc_deals_are_equiprobable():
    game = build_leduc()
    root = game.nodes[0]
    assert root.kind is NodeKind.CHANCE
    assert len(root.children) == 6 * 5
    assert root.probs == pytest.approx([1 / 30] * 30)
    assert len(set(root.actions)) == 30


def test_goofspiel_three_has_one_leaf_per_bid_path():
    game = build_goofspiel(3)
    leaves = [n for n in game.nodes if n.kind is NodeKind.TERMINAL]
    # 3! bid orders per player
    assert len(leaves) == 36
    assert {n.payoff for n in leaves} <= {-1.0, 0.0, 1.0}


@pytest.mark.parametrize("build", [build_leduc, lambda: build_goofspiel(3, "chance-shuffled")])
def test_player_utilities_sum_to_zero(build, rng):
    from src.psd_psro.policy import random_policy
    game = build()
    for _ in range(5):
        x1 = to_sequence_form(game, random_policy(game, 1, rng)).values
        x2 = to_sequence_form(game, random_policy(game, 2, rng)).values
        u1 = float(x1 @ game.sequence_payoffs(1, x2))
        u2 = float(x2 @ game.sequence_payoffs(2, x1))
        assert u1 + u2 == pytest.approx(0.0, abs=1e-12)


def test_kuhn_value_from_the_pure_strategy_game(kuhn):
    def pure_sequences(player):
        index = kuhn.index(player)
        return [to_sequence_form(kuhn, pure_policy(kuhn, player, dict(zip(
                    (s.id for s in index.states), choice)))).values
                for choice in itertools.product(("p", "b"), repeat=len(index))]

    rows, cols = pure_sequences(1), pure_sequences(2)
    m = np.array([[float(x1 @ kuhn.sequence_payoffs(1, x2)) for x2 in cols] for x1 in rows])
    _, _, value = solve_zero_sum_ne(m)
    assert value == pytest.approx(-1 / 18, abs=1e-8)


def test_expected_utility_is_bilinear_in_mixtures(kuhn, rng):
    from src.psd_psro.policy import random_policy
    row = Population(1, tuple(random_policy(kuhn, 1, rng) for _ in range(3)))
    col = Population(2, tuple(random_policy(kuhn, 2, rng) for _ in range(2)))
    a, b = rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(2))
    mixed = expected_utility(kuhn, mixture_to_behavioral(kuhn, MixedPolicy(row, a)),
                             mixture_to_behavioral(kuhn, MixedPolicy(col, b)))
    pairwise = np.array([[expected_utility(kuhn, p, q) for q in col] for p in row])
    assert mixed == pytest.approx(float(a @ pairwise @ b), abs=1e-12)
