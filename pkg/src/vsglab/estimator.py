"""Online impedance-estimation path.

Tumbling one-cycle windows of decimated PCC voltage/current samples are
buffered, z-scored, pushed through the trained network, and de-normalized
into (R_g, L_g) estimates.  A hysteresis gate decides when an estimate is
worth rescheduling gains for.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ann import MlpModel, Normalizer, forward


@dataclass(frozen=True)
class EstimateRecord:
    t: float             # emission time = window_end, s
    r_g_hat: float       # ohms
    l_g_hat: float       # henries
    window_start: float  # s
    window_end: float    # s


class OnlineEstimator:
    """Single-producer buffer-and-infer pipeline (not thread-safe).

    Samples must arrive at the estimator sample period (one accepted
    sample per `sample_dt`); a non-finite sample invalidates the current
    window and the fill restarts.
    """

    def __init__(self, model: MlpModel, norm: Normalizer,
                 window_len: int = 100, sample_dt: float = 200e-6):
        if model.w1.shape[1] != 2 * window_len:
            raise ValueError("model input size must be twice the window length")
        self.model = model
        self.norm = norm
        self.window_len = window_len
        self.sample_dt = sample_dt
        self._v = np.empty(window_len)
        self._i = np.empty(window_len)
        self._fill = 0
        self._window_start = math.nan

    def reset(self) -> None:
        self._fill = 0
        self._window_start = math.nan

    def push_sample(self, t: float, v: float, i: float) -> EstimateRecord | None:
        """Append one (v, i) pair; returns an estimate when a window fills."""
        if not (math.isfinite(v) and math.isfinite(i)):
            self.reset()
            return None
        if self._fill == 0:
            # the window opens one sample period before its first sample
            self._window_start = t - self.sample_dt
        self._v[self._fill] = v
        self._i[self._fill] = i
        self._fill += 1
        if self._fill < self.window_len:
            return None
        x = np.concatenate([self._v, self._i])
        y = self.norm.inverse_y(forward(self.model, self.norm.transform_x(x)))
        rec = EstimateRecord(t=t, r_g_hat=float(y[0]), l_g_hat=float(y[1]),
                             window_start=self._window_start, window_end=t)
        self.reset()
        return rec


class OracleEstimator:
    """Drop-in estimator that emits the true impedance at the same cadence.

    The scenario runner keeps `truth` = (r_g, l_g) current; used to isolate
    control correctness from estimation error.
    """

    def __init__(self, window_len: int = 100, sample_dt: float = 200e-6):
        self.window_len = window_len
        self.sample_dt = sample_dt
        self.truth: tuple[float, float] = (math.nan, math.nan)
        self._fill = 0
        self._window_start = math.nan

    def reset(self) -> None:
        self._fill = 0
        self._window_start = math.nan

    def push_sample(self, t: float, v: float, i: float) -> EstimateRecord | None:
        if self._fill == 0:
            self._window_start = t - self.sample_dt
        self._fill += 1
        if self._fill < self.window_len:
            return None
        rec = EstimateRecord(t=t, r_g_hat=self.truth[0], l_g_hat=self.truth[1],
                             window_start=self._window_start, window_end=t)
        self.reset()
        return rec


def gate_gain_update(est: EstimateRecord, prev_applied: EstimateRecord | None,
                     threshold: float = 0.05) -> bool:
    """Apply scheduling on the first estimate or a >threshold relative change."""
    if prev_applied is None:
        return True
    dr = abs(est.r_g_hat - prev_applied.r_g_hat) / max(abs(prev_applied.r_g_hat), 1e-12)
    dl = abs(est.l_g_hat - prev_applied.l_g_hat) / max(abs(prev_applied.l_g_hat), 1e-12)
    return dr > threshold or dl > threshold


def write_estimate_log_csv(path: str | Path,
                           records: list[tuple[EstimateRecord, float, float, bool]]) -> None:
    """Rows of (record, r_true, l_true, applied)."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["t", "r_g_hat", "l_g_hat", "r_g_true", "l_g_true", "applied"])
        for rec, r_true, l_true, applied in records:
            w.writerow([f"{rec.t:.6f}", f"{rec.r_g_hat:.12g}", f"{rec.l_g_hat:.12g}",
                        f"{r_true:.12g}", f"{l_true:.12g}", int(applied)])
