import numpy as np
import pytest

from src.main import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, main
from src.psd_psro.diversity import psd_distance_exact, weighting_opponent
from src.psd_psro.logger import read_rows
from src.psd_psro.policy import BehavioralPolicy, random_policy, save_policy


def test_games_lists_every_benchmark(capsys):
    assert main(["games"]) == EXIT_OK
    out = capsys.readouterr().out
    for name in ("kuhn", "leduc", "goofspiel", "rps"):
        assert name in out


def test_counterexample_command(capsys):
    assert main(["counterexample"]) == EXIT_OK
    assert "NOT reproduced" not in capsys.readouterr().out


def test_unknown_flag_is_a_usage_error():
    with pytest.raises(SystemExit) as err:
        main(["run", "--no-such-flag"])
    assert err.value.code == EXIT_USAGE


def test_zero_lambda_is_rejected(tmp_path, capsys):
    code = main(["run", "--game", "kuhn", "--variant", "psd-psro", "--lambda", "0",
                 "--out", str(tmp_path / "run")])
    assert code == EXIT_USAGE
    assert "lambda" in capsys.readouterr().err


def test_run_then_eval(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["run", "--game", "rps", "--iters", "3", "--out", str(out)]) == EXIT_OK
    assert len(read_rows(out / "metrics.csv")) == 3
    assert "final meta-NE exploitability" in capsys.readouterr().out

    assert main(["eval", str(out)]) == EXIT_OK
    assert len(read_rows(out / "eval.csv")) == 3


def test_eval_reports_a_corrupted_policy(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["run", "--game", "kuhn", "--iters", "2", "--no-pe", "--out", str(out)]) == EXIT_OK
    (out / "policies" / "p1_001.txt").write_text("J/ 0.5 zero\n")
    capsys.readouterr()
    assert main(["eval", str(out)]) == EXIT_RUNTIME
    assert "p1_001.txt" in capsys.readouterr().err


def test_eval_of_a_missing_directory(tmp_path):
    assert main(["eval", str(tmp_path / "missing")]) == EXIT_RUNTIME


def test_distance_command(kuhn, tmp_path, capsys):
    rng = np.random.default_rng(5)
    pi, other = random_policy(kuhn, 1, rng), random_policy(kuhn, 1, rng)
    save_policy(pi, tmp_path / "a.txt")
    save_policy(other, tmp_path / "b.txt")
    assert main(["distance", "--game", "kuhn", str(tmp_path / "a.txt"), str(tmp_path / "b.txt")]) == EXIT_OK
    printed = float(capsys.readouterr().out.split()[1])
    b = weighting_opponent(kuhn, BehavioralPolicy.uniform(kuhn, 2), 0.01)
    assert printed == pytest.approx(psd_distance_exact(kuhn, pi, other, b), abs=1e-12)
