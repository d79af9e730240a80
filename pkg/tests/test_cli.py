"""Command-line interface smoke tests (in-process via main())."""

import numpy as np
import pytest

from banglearn.cli import main
from banglearn.integrate import read_trajectory_csv
from banglearn.training import load_training_set


def test_scenario_list(capsys):
    assert main(["scenario", "list"]) == 0
    out = capsys.readouterr().out.split()
    for name in ("duffing", "lorenz", "thalamic_phase", "desync",
                 "reduced_hh", "duffing_noise"):
        assert name in out


def test_train_writes_policy(tmp_path, capsys):
    code = main(["train", "--scenario", "duffing", "--n", "20",
                 "--out", str(tmp_path)])
    assert code == 0
    ts = load_training_set(tmp_path / "duffing_policy.txt")
    assert ts.n == 20
    assert set(np.unique(ts.labels)) <= {0.0, 4.0}


def test_simulate_uncontrolled_and_controlled(tmp_path, capsys):
    assert main(["train", "--scenario", "duffing", "--out", str(tmp_path)]) == 0
    policy = tmp_path / "duffing_policy.txt"
    assert main(["simulate", "--scenario", "duffing", "--duration", "2.0",
                 "--out", str(tmp_path)]) == 0
    unc = read_trajectory_csv(tmp_path / "duffing_uncontrolled.csv")
    assert np.all(unc.controls == 0.0)
    assert main(["simulate", "--scenario", "duffing", "--duration", "2.0",
                 "--policy", str(policy), "--x0", "-1.5", "1.5",
                 "--out", str(tmp_path)]) == 0
    ctl = read_trajectory_csv(tmp_path / "duffing_controlled.csv")
    assert set(np.unique(ctl.controls)) <= {0.0, 4.0}


def test_effectiveness_command(tmp_path, capsys):
    code = main(["effectiveness", "--scenario", "duffing", "--trials", "20",
                 "--duration", "15", "--out", str(tmp_path)])
    assert code == 0
    out = capsys.readouterr().out
    assert "effectiveness = 1.0000" in out
    assert (tmp_path / "duffing_trials.csv").exists()


def test_sweep_noise_command(tmp_path, capsys):
    code = main(["sweep-noise", "--scenario", "duffing", "--trials", "5",
                 "--sigmas", "0.2", "--taus", "0.4,0.8", "--out", str(tmp_path)])
    assert code == 0
    assert (tmp_path / "duffing_sweep.csv").exists()
    assert (tmp_path / "duffing_sweep_trials.csv").exists()


def test_prc_command(tmp_path, capsys):
    code = main(["prc", "--model", "radial_clock", "--n-phases", "32",
                 "--out", str(tmp_path)])
    assert code == 0
    lines = (tmp_path / "radial_clock_prc.csv").read_text().splitlines()
    assert lines[0] == "theta,Zprime".replace("Zprime", "Z,Zprime")
    assert len(lines) == 33


def test_write_config_and_scenario_run_from_file(tmp_path, capsys):
    cfg_path = tmp_path / "duffing.cfg"
    assert main(["write-config", "duffing", str(cfg_path)]) == 0
    text = cfg_path.read_text()
    text = text.replace("trials = 1000", "trials = 15")
    cfg_path.write_text(text)
    code = main(["scenario", "run", str(cfg_path), "--out", str(tmp_path / "runs")])
    assert code == 0
    out = capsys.readouterr().out
    assert "effectiveness = 1.0" in out
    assert (tmp_path / "runs" / "duffing" / "metrics.txt").exists()


def test_unknown_scenario_exits_nonzero(capsys):
    assert main(["scenario", "run", "nonexistent_scenario_name"]) == 1
    assert "error:" in capsys.readouterr().err
