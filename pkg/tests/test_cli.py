import csv
import json

import pytest

from wandcal import cli
from wandcal.exceptions import LpFailure
from wandcal.io import read_dataset, read_state

SIM = ["simulate", "--cameras", "3", "--frames", "40", "--m-cal", "40"]


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert cli.main(SIM + ["--seed", "7", "--out", str(out)]) == 0
    return out


def _calibrate(dataset, out, *extra):
    return cli.main(["calibrate", str(dataset / "dataset.json"), "--from-truth", "--m-cal", "40",
                     "--seed", "3", "--out", str(out), *extra])


def test_simulate_is_deterministic(dataset, tmp_path):
    assert cli.main(SIM + ["--seed", "7", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "dataset.json").read_bytes() == (dataset / "dataset.json").read_bytes()
    obs, truth, low = read_dataset(dataset / "dataset.json")
    assert obs.n_cameras == 3 and truth is not None and low == 40


def test_simulate_rejects_one_camera(tmp_path, capsys):
    assert cli.main(["simulate", "--cameras", "1", "--out", str(tmp_path)]) == 2
    assert "at least 2 cameras" in capsys.readouterr().err


def test_simulate_default_flags_validate(tmp_path):
    assert cli.main(["simulate", "--frames", "20", "--out", str(tmp_path)]) == 0
    read_dataset(tmp_path / "dataset.json")


def test_calibrate_noise_free_end_to_end(dataset, tmp_path):
    assert _calibrate(dataset, tmp_path) == 0
    _, doc = read_state(tmp_path / "results.json")
    assert doc["metrics"]["reprojection_rms_px"] <= 1e-6
    with open(tmp_path / "iterations.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["iteration", "E", "LAE", "P", "length_std", "ms_angles", "ms_lp"]
    assert len(rows) == len(doc["report"]["iterations"]) + 1


def test_calibrate_rerun_identical(dataset, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _calibrate(dataset, a, "--max-iters", "2") == 0
    assert _calibrate(dataset, b, "--max-iters", "2") == 0
    assert (a / "results.json").read_bytes() == (b / "results.json").read_bytes()


def test_calibrate_from_init_file(dataset, tmp_path):
    assert cli.main(["calibrate", str(dataset / "dataset.json"), "--init", str(dataset / "truth.json"),
                     "--m-cal", "40", "--max-iters", "1", "--out", str(tmp_path)]) == 0


def test_calibrate_without_init(dataset, tmp_path, capsys):
    assert cli.main(["calibrate", str(dataset / "dataset.json"), "--out", str(tmp_path)]) == 2
    assert "--from-truth" in capsys.readouterr().err


def test_config_unknown_key_rejected(dataset, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"max_iters": 3, "lm": {"lambda0": 1e-3, "speed": 2}}))
    assert _calibrate(dataset, tmp_path, "--config", str(cfg)) == 2
    assert "lm" in capsys.readouterr().err


def test_config_values_used_and_flags_win(dataset, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"max_iters": 1, "tol": 1e-3}))
    assert _calibrate(dataset, tmp_path, "--config", str(cfg), "--max-iters", "2") == 0
    _, doc = read_state(tmp_path / "results.json")
    assert doc["config"]["max_iters"] == 2 and doc["config"]["tol"] == 1e-3


def test_corrupt_dataset(dataset, tmp_path, capsys):
    doc = json.loads((dataset / "dataset.json").read_text())
    doc["intrinsics"][1]["f"] = "wide"
    bad = tmp_path / "d.json"
    bad.write_text(json.dumps(doc))
    assert cli.main(["calibrate", str(bad), "--from-truth", "--out", str(tmp_path)]) == 2
    assert "intrinsics/1/f" in capsys.readouterr().err
    bad.write_text("{not json")
    assert cli.main(["calibrate", str(bad), "--from-truth", "--out", str(tmp_path)]) == 2


def test_numerical_failure_exit_code(dataset, tmp_path, monkeypatch):
    def fail(*args, **kwargs):
        raise LpFailure("infeasible", 1)
    monkeypatch.setattr(cli, "refine", fail)
    assert _calibrate(dataset, tmp_path) == 3


def test_invariant_breach_exit_code(dataset, tmp_path, monkeypatch):
    real = cli.refine

    def shrunk(init, obs, cfg):
        state, report = real(init, obs, cfg)
        return state.scaled(0.5), report
    monkeypatch.setattr(cli, "refine", shrunk)
    assert _calibrate(dataset, tmp_path, "--max-iters", "1") == 4


def test_evaluate(dataset, tmp_path, capsys):
    assert _calibrate(dataset, tmp_path) == 0
    code = cli.main(["evaluate", str(tmp_path / "results.json"), str(dataset / "truth.json"),
                     "--dataset", str(dataset / "dataset.json"), "--out", str(tmp_path)])
    assert code == 0
    assert "center_error_max_m" in capsys.readouterr().out
    summary = json.loads((tmp_path / "metrics.json").read_text())["summary"]
    assert summary["center_error_max_m"] < 1e-6
    assert (tmp_path / "metrics.csv").exists()


def test_evaluate_against_dataset_truth_block(dataset, capsys):
    assert cli.main(["evaluate", str(dataset / "truth.json"), str(dataset / "dataset.json")]) == 0


def test_evaluate_mismatched_counts(dataset, tmp_path, capsys):
    assert cli.main(SIM[:2] + ["4", "--frames", "40", "--m-cal", "40", "--out", str(tmp_path)]) == 0
    assert cli.main(["evaluate", str(tmp_path / "truth.json"), str(dataset / "truth.json")]) == 2
    assert "camera counts" in capsys.readouterr().err


def test_lp_selftest(capsys):
    assert cli.main(["lp-selftest", "--count", "30"]) == 0
    assert "30/30" in capsys.readouterr().out


def test_bad_flag():
    assert cli.main(["calibrate"]) == 2
    assert cli.main(["simulate", "--seed", "-1"]) == 2
