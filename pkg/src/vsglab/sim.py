"""Quasi-static time-domain simulation of the VSG outer power loops.

The three slow control states (angle, frequency, voltage command) are
integrated with classical RK4 at the converter sampling period while the
PCC power is recomputed algebraically from the phasor power flow at every
stage.  Inner voltage/current loops are modeled as ideal (the PCC voltage
magnitude tracks the command instantly).  Scenario events step the SCR or
the power setpoints mid-run; in adaptive mode the estimator is fed
decimated waveform samples and accepted estimates reschedule the gains.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .grid import (GridImpedance, OperatingPoint, PowerPair, JacobianPQ,
                   power_flow, scr_to_impedance, InfeasibleOperatingPointError,
                   _pf, _pf_jac, OMEGA0_DEFAULT)
from .smallsignal import VsgGains, DesignTargets, schedule_gains, SchedulingError
from .estimator import (OnlineEstimator, OracleEstimator, EstimateRecord,
                        gate_gain_update)

SQRT2 = math.sqrt(2.0)


class NumericFailureError(RuntimeError):
    """The integrator produced a non-finite state or derivative."""


@dataclass(frozen=True)
class VsgState:
    delta: float   # VSG angle relative to grid, rad
    omega: float   # VSG angular frequency, rad/s
    v_cmd: float   # PCC voltage-magnitude command, V RMS

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in (self.delta, self.omega, self.v_cmd)):
            raise ValueError("state must be finite")
        if self.v_cmd <= 0.0:
            raise ValueError("v_cmd must be positive")


@dataclass(frozen=True)
class Setpoints:
    p_ref: float                    # W
    q_ref: float                    # var
    omega_nom: float = OMEGA0_DEFAULT
    v_nom: float = 110.0            # V RMS

    def __post_init__(self) -> None:
        if self.omega_nom <= 0 or self.v_nom <= 0:
            raise ValueError("omega_nom and v_nom must be positive")


@dataclass(frozen=True)
class ScenarioEvent:
    time: float
    kind: str                     # set_scr | set_p_ref | set_q_ref
    value: float
    xr_ratio: float | None = None  # only for set_scr; None keeps the current ratio

    def __post_init__(self) -> None:
        if self.kind not in ("set_scr", "set_p_ref", "set_q_ref"):
            raise ValueError(f"unknown event kind {self.kind!r}")


@dataclass(frozen=True)
class SimConfig:
    duration: float
    mode: str = "cvsg"                  # cvsg | avsg
    dt_sim: float = 50e-6
    est_period: float = 200e-6
    out_period: float = 1e-3
    gains: VsgGains = field(default_factory=lambda: VsgGains(2087.0, 0.00767, 0.687, 0.115))
    setpoints: Setpoints = field(default_factory=lambda: Setpoints(2000.0, 1000.0))
    scr: float = 2.0
    xr_ratio: float = 5.0
    v_g: float = 110.0
    s_rated: float = 5000.0
    omega0: float = OMEGA0_DEFAULT
    meas_lpf_cutoff: float | None = None  # rad/s; None disables the P/Q filter
    estimator_kind: str = "ann"           # ann | oracle (avsg only)
    gate_threshold: float = 0.05
    targets: DesignTargets = field(default_factory=DesignTargets)
    start_at_equilibrium: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in ("cvsg", "avsg"):
            raise ValueError(f"mode must be cvsg or avsg, got {self.mode!r}")
        if self.estimator_kind not in ("ann", "oracle"):
            raise ValueError(f"estimator_kind must be ann or oracle")
        for period, name in ((self.est_period, "est_period"), (self.out_period, "out_period")):
            k = period / self.dt_sim
            if abs(k - round(k)) > 1e-9 or round(k) < 1:
                raise ValueError(f"{name} must be an integer multiple of dt_sim")


TIMESERIES_COLUMNS = ("t", "p_pcc", "q_pcc", "delta", "omega", "v_cmd",
                      "r_g_true", "l_g_true", "r_g_est", "l_g_est",
                      "d_p", "k_ip", "d_q", "k_iq")


@dataclass
class TimeSeries:
    """Uniformly sampled simulation trace; one numpy array per column."""

    t: np.ndarray
    p_pcc: np.ndarray
    q_pcc: np.ndarray
    delta: np.ndarray
    omega: np.ndarray
    v_cmd: np.ndarray
    r_g_true: np.ndarray
    l_g_true: np.ndarray
    r_g_est: np.ndarray
    l_g_est: np.ndarray
    d_p: np.ndarray
    k_ip: np.ndarray
    d_q: np.ndarray
    k_iq: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    def to_csv(self, path: str | Path) -> None:
        cols = [getattr(self, c) for c in TIMESERIES_COLUMNS]
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(TIMESERIES_COLUMNS)
            for row in zip(*cols):
                w.writerow([f"{row[0]:.6f}"] + [f"{v:.12g}" for v in row[1:]])

    @classmethod
    def from_csv(cls, path: str | Path) -> "TimeSeries":
        data = np.genfromtxt(path, delimiter=",", names=True)
        return cls(**{c: np.atleast_1d(data[c]) for c in TIMESERIES_COLUMNS})


@dataclass
class SimResult:
    series: TimeSeries
    # (record, r_true at emission, l_true at emission, applied)
    estimates: list[tuple[EstimateRecord, float, float, bool]]
    final_gains: VsgGains


def vsg_derivatives(state: VsgState, sp: Setpoints, meas: PowerPair,
                    gains: VsgGains, omega_g: float | None = None) -> VsgState:
    """Time derivative of the outer-loop state (returned in a VsgState shell).

    d(delta)/dt = omega - omega_g
    d(omega)/dt = K_ip (P_ref - P_pcc - D_p (omega - omega_nom))
    d(v_cmd)/dt = K_iq (Q_ref - Q_pcc - D_q (v_cmd - v_nom))
    """
    wg = sp.omega_nom if omega_g is None else omega_g
    dd = state.omega - wg
    dw = gains.k_ip * (sp.p_ref - meas.p - gains.d_p * (state.omega - sp.omega_nom))
    dv = gains.k_iq * (sp.q_ref - meas.q - gains.d_q * (state.v_cmd - sp.v_nom))
    return _raw_state(dd, dw, dv)


def _raw_state(delta: float, omega: float, v_cmd: float) -> VsgState:
    # bypass validation: derivative components may be zero or negative
    obj = object.__new__(VsgState)
    object.__setattr__(obj, "delta", delta)
    object.__setattr__(obj, "omega", omega)
    object.__setattr__(obj, "v_cmd", v_cmd)
    return obj


def step_rk4(y, f, dt: float):
    """Classical fourth-order Runge-Kutta step for float or ndarray state."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    out = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise NumericFailureError("non-finite state after RK4 step")
    return out


def synth_waveforms(op: OperatingPoint, z: GridImpedance, n: int, dt_s: float,
                    t0: float) -> tuple[np.ndarray, np.ndarray]:
    """Single-phase instantaneous v/i samples at t0 + k*dt_s, k = 0..n-1.

    v(t) = sqrt(2) V_pcc sin(w0 t + delta); the current phasor is
    (V_pcc angle delta - V_g angle 0) / Z.
    """
    if n < 1 or dt_s <= 0.0:
        raise ValueError("need n >= 1 and dt_s > 0")
    ibar = (op.v_pcc0 * complex(math.cos(op.delta0), math.sin(op.delta0)) - op.v_g) \
        / complex(z.r_g, z.x_g)
    t = t0 + np.arange(n) * dt_s
    v = SQRT2 * op.v_pcc0 * np.sin(z.omega0 * t + op.delta0)
    i = SQRT2 * abs(ibar) * np.sin(z.omega0 * t + math.atan2(ibar.imag, ibar.real))
    return v, i


def solve_equilibrium(sp: Setpoints, gains: VsgGains, z: GridImpedance,
                      v_g: float, max_iter: int = 50, tol: float = 1e-10) -> VsgState:
    """Steady state of the outer loops: P = P_ref and Q + D_q (V - v_nom) = Q_ref."""
    scale = max(abs(sp.p_ref), abs(sp.q_ref), 1.0)
    d, v = 0.0, v_g
    for _ in range(max_iter):
        p, q = _pf(d, v, v_g, z.r_g, z.x_g)
        rp = p - sp.p_ref
        rq = q + gains.d_q * (v - sp.v_nom) - sp.q_ref
        if math.hypot(rp, rq) <= tol * scale:
            return VsgState(delta=d, omega=sp.omega_nom, v_cmd=v)
        a, b, c, dd = _pf_jac(d, v, v_g, z.r_g, z.x_g)
        dd += gains.d_q
        det = a * dd - b * c
        if det == 0.0:
            break
        d -= (dd * rp - b * rq) / det
        v -= (-c * rp + a * rq) / det
        if abs(d) >= math.pi / 2 or not (0.5 * v_g < v < 1.5 * v_g):
            break
    raise InfeasibleOperatingPointError("no equilibrium for the given setpoints")


def _clamped_impedance(r_hat: float, l_hat: float, omega0: float) -> GridImpedance:
    # estimates can stray slightly negative during transients
    r = max(r_hat, 0.0)
    x = max(omega0 * l_hat, 1e-9)
    return GridImpedance(r_g=r, x_g=x, l_g=x / omega0, omega0=omega0)


def run_scenario(cfg: SimConfig, events: list[ScenarioEvent],
                 model=None, norm=None) -> SimResult:
    """Integrate the scenario and return the decimated trace and estimate log."""
    try:
        return _run_scenario(cfg, events, model, norm)
    except OverflowError as exc:
        raise NumericFailureError(f"state diverged during integration: {exc}") from exc
    except ValueError as exc:
        # math.sin/cos raise a domain error once the state reaches inf; report
        # that as divergence, but let validation ValueErrors propagate
        if "math domain error" in str(exc):
            raise NumericFailureError("state diverged during integration") from exc
        raise


def _run_scenario(cfg: SimConfig, events: list[ScenarioEvent],
                  model=None, norm=None) -> SimResult:
    events = sorted(events, key=lambda e: e.time)
    for ev in events:
        if not (0.0 <= ev.time <= cfg.duration):
            raise ValueError(f"event at t={ev.time} outside scenario duration")

    z = scr_to_impedance(cfg.scr, cfg.xr_ratio, cfg.v_g, cfg.s_rated, cfg.omega0)
    sp = cfg.setpoints
    gains = cfg.gains
    if cfg.start_at_equilibrium:
        st = solve_equilibrium(sp, gains, z, cfg.v_g)
        d, w, v = st.delta, st.omega, st.v_cmd
    else:
        d, w, v = 0.0, sp.omega_nom, sp.v_nom

    estimator = None
    if cfg.mode == "avsg":
        win = 100
        if cfg.estimator_kind == "oracle":
            estimator = OracleEstimator(window_len=win, sample_dt=cfg.est_period)
            estimator.truth = (z.r_g, z.l_g)
        else:
            if model is None or norm is None:
                raise ValueError("avsg mode with the ann estimator needs model and norm")
            estimator = OnlineEstimator(model, norm, window_len=win,
                                        sample_dt=cfg.est_period)

    h = cfg.dt_sim
    n_steps = int(round(cfg.duration / h))
    dec_est = int(round(cfg.est_period / h))
    dec_out = int(round(cfg.out_period / h))
    n_out = n_steps // dec_out + 1

    out = np.empty((n_out, len(TIMESERIES_COLUMNS)))
    est_log: list[tuple[EstimateRecord, float, float, bool]] = []
    prev_applied: EstimateRecord | None = None
    r_est = l_est = math.nan

    # locals for the hot loop
    vg = cfg.v_g
    wn = sp.omega_nom
    vn = sp.v_nom
    wg = wn  # grid-frequency events are a hook only; default scenarios keep wg = w0
    pref, qref = sp.p_ref, sp.q_ref
    dp, kip, dq, kiq = gains.d_p, gains.k_ip, gains.d_q, gains.k_iq
    r, x = z.r_g, z.x_g
    kz = 3.0 / (r * r + x * x)
    w0 = cfg.omega0
    sin, cos = math.sin, math.cos
    use_lpf = cfg.meas_lpf_cutoff is not None
    wc = cfg.meas_lpf_cutoff or 0.0
    pf_s, qf_s = _pf(d, v, vg, r, x) if use_lpf else (0.0, 0.0)

    ev_idx = 0
    out_row = 0
    half = 0.5 * h

    for k in range(n_steps + 1):
        t = k * h

        # events apply at the first step with t >= event time
        while ev_idx < len(events) and events[ev_idx].time <= t:
            ev = events[ev_idx]
            ev_idx += 1
            if ev.kind == "set_p_ref":
                pref = ev.value
            elif ev.kind == "set_q_ref":
                qref = ev.value
            else:
                xr = ev.xr_ratio if ev.xr_ratio is not None else (
                    x / r if r > 0.0 else cfg.xr_ratio)
                z = scr_to_impedance(ev.value, xr, vg, cfg.s_rated, w0)
                r, x = z.r_g, z.x_g
                kz = 3.0 / (r * r + x * x)
                if isinstance(estimator, OracleEstimator):
                    estimator.truth = (z.r_g, z.l_g)

        # estimator decimation: every dec_est-th step, skipping t = 0
        if estimator is not None and k > 0 and k % dec_est == 0:
            ibar = (v * complex(cos(d), sin(d)) - vg) / complex(r, x)
            v_inst = SQRT2 * v * sin(w0 * t + d)
            i_inst = SQRT2 * abs(ibar) * sin(w0 * t + math.atan2(ibar.imag, ibar.real))
            rec = estimator.push_sample(t, v_inst, i_inst)
            if rec is not None:
                applied = gate_gain_update(rec, prev_applied, cfg.gate_threshold)
                if applied:
                    z_hat = _clamped_impedance(rec.r_g_hat, rec.l_g_hat, w0)
                    ja, jb, jc, jd = _pf_jac(d, v, vg, z_hat.r_g, z_hat.x_g)
                    try:
                        g_new = schedule_gains(JacobianPQ(ja, jb, jc, jd), cfg.targets)
                        dp, kip, dq, kiq = g_new.d_p, g_new.k_ip, g_new.d_q, g_new.k_iq
                        prev_applied = rec
                    except SchedulingError:
                        applied = False  # keep previous gains
                est_log.append((rec, z.r_g, z.l_g, applied))
                r_est, l_est = rec.r_g_hat, rec.l_g_hat

        if k % dec_out == 0:
            if not (math.isfinite(d) and math.isfinite(w) and math.isfinite(v)):
                raise NumericFailureError(f"non-finite state at t = {t:.6f}")
            # log P/Q through the shared power-flow path (bit-identical to power_flow)
            p_log, q_log = _pf(d, v, vg, r, x)
            out[out_row] = (t, p_log, q_log, d, w, v, z.r_g, z.l_g,
                            r_est, l_est, dp, kip, dq, kiq)
            out_row += 1

        if k == n_steps:
            break

        if use_lpf:
            # slower 5-state path: first-order filter on measured P/Q
            def deriv(dd_, ww_, vv_, pf_, qf_):
                p_, q_ = _pf(dd_, vv_, vg, r, x)
                return (ww_ - wg,
                        kip * (pref - pf_ - dp * (ww_ - wn)),
                        kiq * (qref - qf_ - dq * (vv_ - vn)),
                        wc * (p_ - pf_),
                        wc * (q_ - qf_))

            k1 = deriv(d, w, v, pf_s, qf_s)
            k2 = deriv(d + half * k1[0], w + half * k1[1], v + half * k1[2],
                       pf_s + half * k1[3], qf_s + half * k1[4])
            k3 = deriv(d + half * k2[0], w + half * k2[1], v + half * k2[2],
                       pf_s + half * k2[3], qf_s + half * k2[4])
            k4 = deriv(d + h * k3[0], w + h * k3[1], v + h * k3[2],
                       pf_s + h * k3[3], qf_s + h * k3[4])
            s6 = h / 6.0
            d += s6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            w += s6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
            v += s6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
            pf_s += s6 * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3])
            qf_s += s6 * (k1[4] + 2 * k2[4] + 2 * k3[4] + k4[4])
            continue

        # fast 3-state path with the power flow inlined (RK4 stages k1..k4)
        sd = sin(d); cd = cos(d)
        vvg = v * vg
        p = kz * (r * v * v - r * vvg * cd + x * vvg * sd)
        q = kz * (x * v * v - x * vvg * cd - r * vvg * sd)
        dd1 = w - wg
        dw1 = kip * (pref - p - dp * (w - wn))
        dv1 = kiq * (qref - q - dq * (v - vn))

        d2 = d + half * dd1; w2 = w + half * dw1; v2 = v + half * dv1
        sd = sin(d2); cd = cos(d2)
        vvg = v2 * vg
        p = kz * (r * v2 * v2 - r * vvg * cd + x * vvg * sd)
        q = kz * (x * v2 * v2 - x * vvg * cd - r * vvg * sd)
        dd2 = w2 - wg
        dw2 = kip * (pref - p - dp * (w2 - wn))
        dv2 = kiq * (qref - q - dq * (v2 - vn))

        d2 = d + half * dd2; w2 = w + half * dw2; v2 = v + half * dv2
        sd = sin(d2); cd = cos(d2)
        vvg = v2 * vg
        p = kz * (r * v2 * v2 - r * vvg * cd + x * vvg * sd)
        q = kz * (x * v2 * v2 - x * vvg * cd - r * vvg * sd)
        dd3 = w2 - wg
        dw3 = kip * (pref - p - dp * (w2 - wn))
        dv3 = kiq * (qref - q - dq * (v2 - vn))

        d2 = d + h * dd3; w2 = w + h * dw3; v2 = v + h * dv3
        sd = sin(d2); cd = cos(d2)
        vvg = v2 * vg
        p = kz * (r * v2 * v2 - r * vvg * cd + x * vvg * sd)
        q = kz * (x * v2 * v2 - x * vvg * cd - r * vvg * sd)
        dd4 = w2 - wg
        dw4 = kip * (pref - p - dp * (w2 - wn))
        dv4 = kiq * (qref - q - dq * (v2 - vn))

        s6 = h / 6.0
        d += s6 * (dd1 + 2.0 * dd2 + 2.0 * dd3 + dd4)
        w += s6 * (dw1 + 2.0 * dw2 + 2.0 * dw3 + dw4)
        v += s6 * (dv1 + 2.0 * dv2 + 2.0 * dv3 + dv4)

    cols = out[:out_row].T
    series = TimeSeries(**dict(zip(TIMESERIES_COLUMNS, cols)))
    return SimResult(series=series, estimates=est_log,
                     final_gains=VsgGains(dp, kip, dq, kiq))


# ---------------------------------------------------------------------------
# Scenario config documents (JSON)
# ---------------------------------------------------------------------------

def scenario_to_dict(cfg: SimConfig, events: list[ScenarioEvent]) -> dict:
    doc = {
        "sim": {
            "duration": cfg.duration, "mode": cfg.mode, "dt_sim": cfg.dt_sim,
            "est_period": cfg.est_period, "out_period": cfg.out_period,
            "scr": cfg.scr, "xr_ratio": cfg.xr_ratio,
            "v_g": cfg.v_g, "s_rated": cfg.s_rated, "omega0": cfg.omega0,
            "meas_lpf_cutoff": cfg.meas_lpf_cutoff,
            "estimator_kind": cfg.estimator_kind,
            "gate_threshold": cfg.gate_threshold,
            "start_at_equilibrium": cfg.start_at_equilibrium,
            "seed": cfg.seed,
            "gains": {"d_p": cfg.gains.d_p, "k_ip": cfg.gains.k_ip,
                      "d_q": cfg.gains.d_q, "k_iq": cfg.gains.k_iq},
            "setpoints": {"p_ref": cfg.setpoints.p_ref, "q_ref": cfg.setpoints.q_ref,
                          "omega_nom": cfg.setpoints.omega_nom,
                          "v_nom": cfg.setpoints.v_nom},
            "targets": {"t_s": cfg.targets.t_s, "xi": cfg.targets.xi,
                        "q_droop_divisor": cfg.targets.q_droop_divisor},
        },
        "events": [
            {"time": e.time, "kind": e.kind, "value": e.value,
             **({"xr_ratio": e.xr_ratio} if e.xr_ratio is not None else {})}
            for e in events
        ],
    }
    return doc


def scenario_from_dict(doc: dict) -> tuple[SimConfig, list[ScenarioEvent]]:
    s = dict(doc["sim"])
    gains = VsgGains(**s.pop("gains"))
    setpoints = Setpoints(**s.pop("setpoints"))
    targets = DesignTargets(**s.pop("targets", {}))
    cfg = SimConfig(gains=gains, setpoints=setpoints, targets=targets, **s)
    events = [ScenarioEvent(time=e["time"], kind=e["kind"], value=e["value"],
                            xr_ratio=e.get("xr_ratio")) for e in doc.get("events", [])]
    return cfg, events


def save_scenario(path: str | Path, cfg: SimConfig, events: list[ScenarioEvent]) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(cfg, events), indent=2))


def load_scenario(path: str | Path) -> tuple[SimConfig, list[ScenarioEvent]]:
    return scenario_from_dict(json.loads(Path(path).read_text()))
