import numpy as np
import pytest

from src.psd_psro.errors import MetaGameError
from src.psd_psro.games import RPS
from src.psd_psro.meta_solver import (fill_payoff_matrix, ne_gap, read_meta_ne, rectified_weights,
                                      regret_matching, save_meta_game, solve_zero_sum_ne)
from src.psd_psro.policy import Population

from helpers import rps_pure


def test_rps_meta_ne_is_uniform():
    row, col, value = solve_zero_sum_ne(RPS.payoffs)
    assert row == pytest.approx([1 / 3] * 3, abs=1e-9)
    assert col == pytest.approx([1 / 3] * 3, abs=1e-9)
    assert value == pytest.approx(0.0, abs=1e-9)


def test_dominant_row_and_column():
    m = np.array([[2.0, 3.0], [1.0, 0.0]])
    row, col, value = solve_zero_sum_ne(m)
    assert row == pytest.approx([1.0, 0.0], abs=1e-9)
    assert col == pytest.approx([1.0, 0.0], abs=1e-9)
    assert value == pytest.approx(2.0)


def test_rectangular_game_certificate():
    m = np.array([[3.0, -1.0, 0.5], [-2.0, 4.0, 1.0]])
    row, col, value = solve_zero_sum_ne(m)
    assert ne_gap(m, row, col) <= 1e-8
    assert value == pytest.approx(float(row @ m @ col))


def test_regret_matching_approaches_equilibrium():
    row, col = regret_matching(RPS.payoffs, iterations=20000)
    assert row == pytest.approx([1 / 3] * 3, abs=1e-2)
    assert ne_gap(RPS.payoffs, row, col) < 1e-2


def test_non_finite_matrix_is_rejected():
    with pytest.raises(MetaGameError):
        solve_zero_sum_ne(np.array([[0.0, np.nan]]))


def test_rectified_weights_keep_beaten_or_tied_columns():
    sigma = np.full(3, 1 / 3)
    assert rectified_weights(RPS.payoffs, sigma, sigma, 0) == pytest.approx([0.5, 0.0, 0.5])


def test_rectified_weights_all_non_negative_row_keeps_ne():
    m = np.array([[1.0, 2.0], [-1.0, 0.5]])
    sigma_col = np.array([0.25, 0.75])
    assert rectified_weights(m, np.array([1.0, 0.0]), sigma_col, 0) == pytest.approx(sigma_col)


def test_rectified_weights_fall_back_when_nothing_is_beaten():
    m = np.array([[-1.0, -2.0]])
    sigma_col = np.array([0.4, 0.6])
    assert rectified_weights(m, np.array([1.0]), sigma_col, 0) == pytest.approx(sigma_col)


def test_rectified_weights_outside_support():
    with pytest.raises(MetaGameError):
        rectified_weights(RPS.payoffs, np.array([0.0, 0.5, 0.5]), np.full(3, 1 / 3), 0)


def test_incremental_fill_evaluates_new_entries_only(rps):
    rock1, rock2 = rps_pure(rps, 1, "R"), rps_pure(rps, 2, "R")
    first = fill_payoff_matrix(rps, Population(1, (rock1,)), Population(2, (rock2,)))
    assert first.evaluations == 1
    second = fill_payoff_matrix(rps, Population(1, (rock1, rps_pure(rps, 1, "P"))),
                                Population(2, (rock2, rps_pure(rps, 2, "S"))), previous=first)
    assert second.evaluations == 3
    assert second.payoffs.tolist() == [[0.0, 1.0], [1.0, -1.0]]


def test_fill_rejects_non_prefix_previous(rps):
    first = fill_payoff_matrix(rps, Population(1, (rps_pure(rps, 1, "R"),)),
                               Population(2, (rps_pure(rps, 2, "R"),)))
    with pytest.raises(MetaGameError):
        fill_payoff_matrix(rps, Population(1, (rps_pure(rps, 1, "P"),)),
                           Population(2, (rps_pure(rps, 2, "R"),)), previous=first)


def test_threaded_fill_matches_sequential(rps):
    row = Population(1, tuple(rps_pure(rps, 1, a) for a in "RPS"))
    col = Population(2, tuple(rps_pure(rps, 2, a) for a in "RPS"))
    assert np.array_equal(fill_payoff_matrix(rps, row, col, workers=4).payoffs,
                          fill_payoff_matrix(rps, row, col).payoffs)


def test_meta_file_keeps_equilibrium(rps, tmp_path):
    row = Population(1, tuple(rps_pure(rps, 1, a) for a in "RPS"))
    col = Population(2, tuple(rps_pure(rps, 2, a) for a in "RPS"))
    meta = fill_payoff_matrix(rps, row, col).solved()
    save_meta_game(meta, tmp_path / "meta.txt", (["a", "b", "c"], ["d", "e", "f"]))
    ne = read_meta_ne(tmp_path / "meta.txt")
    assert np.array_equal(ne.row, meta.ne.row)
    assert ne.value == meta.ne.value
    members = (tmp_path / "members.txt").read_text().splitlines()
    assert members[0] == "1 0 a" and members[-1] == "2 2 f"


def test_affine_payoffs_keep_the_equilibrium(rng):
    m = rng.normal(size=(4, 5))
    row, col, value = solve_zero_sum_ne(m)
    for scale, shift in ((3.0, 0.0), (0.5, -2.0), (10.0, 7.5)):
        r, c, v = solve_zero_sum_ne(scale * m + shift)
        assert v == pytest.approx(scale * value + shift, abs=1e-8 * scale)
        assert r == pytest.approx(row, abs=1e-7)
        assert c == pytest.approx(col, abs=1e-7)
