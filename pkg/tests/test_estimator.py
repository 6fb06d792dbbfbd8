"""Sample buffering, estimate cadence, and the gain-update gate."""

import math

import numpy as np
import pytest

from vsglab.ann import MlpModel, Normalizer
from vsglab.estimator import (EstimateRecord, OnlineEstimator, OracleEstimator,
                              gate_gain_update, write_estimate_log_csv)

DT = 200e-6


def dummy_estimator(window_len=100):
    """Identity-free model; only the buffering behavior matters here."""
    n_in = 2 * window_len
    model = MlpModel(np.zeros((2, n_in)), np.zeros(2), np.zeros((2, 2)),
                     np.array([0.5, 0.01]), hidden_activation="linear")
    norm = Normalizer(np.zeros(n_in), np.ones(n_in), np.zeros(2), np.ones(2),
                      target_transform="identity")
    return OnlineEstimator(model, norm, window_len=window_len, sample_dt=DT)


def push_stream(est, n, t_start=DT):
    records = []
    for j in range(n):
        rec = est.push_sample(t_start + j * DT, 1.0, 2.0)
        if rec is not None:
            records.append(rec)
    return records


def test_one_estimate_per_full_window():
    est = dummy_estimator()
    for n in (99, 100, 199, 250, 1000):
        est.reset()
        assert len(push_stream(est, n)) == n // 100


def test_window_span_is_one_cycle():
    records = push_stream(dummy_estimator(), 500)
    for rec in records:
        assert rec.window_end == rec.t
        assert rec.window_end - rec.window_start == pytest.approx(0.02, abs=1e-12)


def test_estimates_are_back_to_back():
    records = push_stream(dummy_estimator(), 300)
    for a, b in zip(records, records[1:]):
        assert b.window_start == pytest.approx(a.window_end, abs=1e-12)


def test_non_finite_sample_restarts_window():
    est = dummy_estimator()
    for j in range(60):
        assert est.push_sample((j + 1) * DT, 1.0, 1.0) is None
    assert est.push_sample(61 * DT, math.nan, 1.0) is None
    # the partial window is discarded; 100 fresh samples needed again
    records = push_stream(est, 100, t_start=62 * DT)
    assert len(records) == 1
    assert records[0].window_start == pytest.approx(61 * DT, abs=1e-12)


def test_model_window_size_mismatch_rejected():
    est = dummy_estimator()
    with pytest.raises(ValueError):
        OnlineEstimator(est.model, est.norm, window_len=50)


def test_oracle_estimator_same_cadence():
    est = OracleEstimator()
    est.truth = (0.7, 0.011)
    records = []
    for j in range(250):
        rec = est.push_sample((j + 1) * DT, 0.0, 0.0)
        if rec is not None:
            records.append(rec)
    assert len(records) == 2
    assert all(r.r_g_hat == 0.7 and r.l_g_hat == 0.011 for r in records)
    assert records[0].window_end - records[0].window_start == pytest.approx(0.02, abs=1e-12)


def test_gate_applies_first_estimate():
    rec = EstimateRecord(t=0.02, r_g_hat=0.7, l_g_hat=0.011,
                         window_start=0.0, window_end=0.02)
    assert gate_gain_update(rec, None)


def test_gate_blocks_repeats_and_passes_changes():
    prev = EstimateRecord(t=0.02, r_g_hat=0.7, l_g_hat=0.011,
                          window_start=0.0, window_end=0.02)
    same = EstimateRecord(t=0.04, r_g_hat=0.7, l_g_hat=0.011,
                          window_start=0.02, window_end=0.04)
    small = EstimateRecord(t=0.04, r_g_hat=0.7 * 1.03, l_g_hat=0.011,
                           window_start=0.02, window_end=0.04)
    big = EstimateRecord(t=0.04, r_g_hat=0.7, l_g_hat=0.011 * 1.2,
                         window_start=0.02, window_end=0.04)
    assert not gate_gain_update(same, prev)
    assert not gate_gain_update(small, prev)
    assert gate_gain_update(big, prev)
    assert gate_gain_update(small, prev, threshold=0.01)


def test_estimate_log_csv(tmp_path):
    rec = EstimateRecord(t=0.02, r_g_hat=0.7, l_g_hat=0.011,
                         window_start=0.0, window_end=0.02)
    path = tmp_path / "est.csv"
    write_estimate_log_csv(path, [(rec, 0.712, 0.01133, True)])
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "t,r_g_hat,l_g_hat,r_g_true,l_g_true,applied"
    assert lines[1].startswith("0.020000,0.7,0.011,")
    assert lines[1].endswith(",1")
