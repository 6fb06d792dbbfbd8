"""Command-line interface smoke tests on short scenarios."""

import math

import numpy as np
import pytest

from vsglab.cli import main
from vsglab.sim import SimConfig, ScenarioEvent, Setpoints, TimeSeries, save_scenario
from vsglab.smallsignal import VsgGains


def short_scenario(path, mode="cvsg", duration=2.0, estimator_kind="oracle"):
    cfg = SimConfig(duration=duration, mode=mode, estimator_kind=estimator_kind,
                    gains=VsgGains(2087.0, 0.00767, 0.687, 0.115),
                    setpoints=Setpoints(2000.0, 1000.0), scr=2.0)
    events = [ScenarioEvent(time=0.5, kind="set_p_ref", value=2500.0)]
    save_scenario(path, cfg, events)
    return cfg, events


def test_gains_from_jacobian_entries(capsys):
    assert main(["gains", "--a", "10000", "--d", "100"]) == 0
    out = capsys.readouterr().out
    assert "D_p  = 5000" in out
    assert "K_ip = 0.0016" in out
    assert "D_q  = 1" in out
    assert "K_iq = 0.039604" in out
    assert "Ts(rule) = 1 s" in out


def test_gains_solved_from_grid(capsys):
    assert main(["gains", "--scr", "2", "--p", "2000", "--q", "1000"]) == 0
    out = capsys.readouterr().out
    assert "omega_n = 4 rad/s" in out


def test_gains_rejects_bad_inputs(capsys):
    assert main(["gains", "--a", "-1", "--d", "100"]) == 2


def test_bode_fixed_gains_margins_decrease(tmp_path, capsys):
    assert main(["bode", "--scr-list", "2,8,20", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    margins = [float(line.split()[-2]) for line in out.strip().splitlines()]
    assert margins[0] > margins[1] > margins[2]
    assert (tmp_path / "bode_p_fixed_scr2.csv").exists()
    assert (tmp_path / "bode_p_fixed_scr20.csv").exists()


def test_bode_scheduled_margins_agree(tmp_path, capsys):
    assert main(["bode", "--scr-list", "2,20", "--scheduled", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    margins = [float(line.split()[-2]) for line in out.strip().splitlines()]
    assert abs(margins[0] - margins[1]) < 0.1


def test_dataset_then_train(tmp_path, capsys):
    ds_path = tmp_path / "ds.csv"
    assert main(["dataset", "--out", str(ds_path), "--n", "80", "--seed", "0"]) == 0
    assert main(["train", "--dataset", str(ds_path), "--out", str(tmp_path),
                 "--seed", "0"]) == 0
    out = capsys.readouterr().out
    assert "trained" in out
    assert (tmp_path / "model.json").exists()
    assert (tmp_path / "training_trace.csv").exists()
    assert (tmp_path / "error_histogram.csv").exists()
    assert (tmp_path / "regression.csv").exists()


def test_simulate_from_config(tmp_path):
    sc = tmp_path / "scenario.json"
    short_scenario(sc)
    assert main(["simulate", "--config", str(sc), "--out", str(tmp_path)]) == 0
    series = TimeSeries.from_csv(tmp_path / "timeseries_cvsg.csv")
    assert len(series) == 2001
    assert series.p_pcc[-1] == pytest.approx(2500.0, abs=1.0)


def test_simulate_avsg_without_model_fails(tmp_path):
    sc = tmp_path / "scenario.json"
    short_scenario(sc, mode="avsg", estimator_kind="ann")
    assert main(["simulate", "--config", str(sc), "--out", str(tmp_path)]) == 2


def test_simulate_mode_override_with_oracle(tmp_path):
    sc = tmp_path / "scenario.json"
    short_scenario(sc, mode="avsg", estimator_kind="oracle")
    assert main(["simulate", "--config", str(sc), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "estimates.csv").exists()


def test_evaluate_from_saved_traces(tmp_path):
    sc = tmp_path / "scenario.json"
    short_scenario(sc, mode="avsg", estimator_kind="oracle", duration=4.0)
    assert main(["simulate", "--config", str(sc), "--mode", "cvsg",
                 "--out", str(tmp_path)]) == 0
    assert main(["simulate", "--config", str(sc), "--out", str(tmp_path)]) == 0
    rc = main(["evaluate", "--cvsg", str(tmp_path / "timeseries_cvsg.csv"),
               "--avsg", str(tmp_path / "timeseries_avsg.csv"),
               "--estimates", str(tmp_path / "estimates.csv"),
               "--scenario", str(sc), "--out", str(tmp_path)])
    assert rc in (0, 1)
    assert (tmp_path / "report.txt").exists()
    assert (tmp_path / "report.csv").exists()
