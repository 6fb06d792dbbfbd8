"""Small-signal machinery for the VSG power loops.

Control-law and open/closed-loop transfer functions, Bode evaluation
with phase unwrapping, phase-margin extraction, and the gain-scheduling
rule that pins the active loop at omega_n = 4/(xi*Ts) with damping xi
and the reactive loop at a first-order pole with ~1% steady-state error.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class DesignRegionError(ValueError):
    """Static loop gain is non-positive; the linearized design rules do not apply."""


class SchedulingError(DesignRegionError):
    """Gain scheduling rejected the Jacobian entries; keep previous gains."""


class NoCrossoverError(ValueError):
    """The magnitude response never crosses 0 dB on the evaluated grid."""


class ExcludedPointError(ValueError):
    """Transfer-function evaluation hit a pole on the imaginary axis."""


@dataclass(frozen=True)
class VsgGains:
    """The four schedulable VSG power-loop parameters."""

    d_p: float   # active droop, W*s/rad
    k_ip: float  # active integral gain (virtual inertia), rad/(W*s)
    d_q: float   # reactive droop, var/V
    k_iq: float  # reactive integral gain, V/(var*s)

    def __post_init__(self) -> None:
        for name in ("d_p", "k_ip", "d_q", "k_iq"):
            v = getattr(self, name)
            if not (v > 0.0 and math.isfinite(v)):
                raise ValueError(f"{name} must be finite and > 0, got {v}")


@dataclass(frozen=True)
class DesignTargets:
    """Closed-loop performance targets driving the scheduling rule."""

    t_s: float = 1.0                # settling time, s (4/(xi*omega_n) rule)
    xi: float = 1.0                 # damping factor
    q_droop_divisor: float = 100.0  # D_q = D / divisor

    def __post_init__(self) -> None:
        if self.t_s <= 0 or self.xi <= 0 or self.q_droop_divisor <= 0:
            raise ValueError("design targets must be positive")


@dataclass(frozen=True)
class TransferFunction:
    """Rational transfer function; coefficients in ascending powers of s."""

    num: tuple[float, ...]
    den: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.den or self.den[-1] == 0.0:
            raise ValueError("denominator leading coefficient must be nonzero")
        if not all(math.isfinite(c) for c in self.num + self.den):
            raise ValueError("coefficients must be finite")

    def __call__(self, s: complex) -> complex:
        num = complex(np.polynomial.polynomial.polyval(s, np.asarray(self.num)))
        den = complex(np.polynomial.polynomial.polyval(s, np.asarray(self.den)))
        if den == 0:
            raise ExcludedPointError(f"pole at s = {s}")
        return num / den

    def __mul__(self, other: "TransferFunction") -> "TransferFunction":
        num = np.polynomial.polynomial.polymul(self.num, other.num)
        den = np.polynomial.polynomial.polymul(self.den, other.den)
        return TransferFunction(num=tuple(num), den=tuple(den))

    def scaled(self, k: float) -> "TransferFunction":
        return TransferFunction(num=tuple(k * c for c in self.num), den=self.den)


@dataclass(frozen=True)
class FrequencyResponse:
    """Sampled frequency response with unwrapped phase."""

    omega: np.ndarray      # rad/s, strictly increasing
    mag_db: np.ndarray
    phase_deg: np.ndarray  # unwrapped

    def __post_init__(self) -> None:
        if np.any(np.diff(self.omega) <= 0):
            raise ValueError("frequency grid must be strictly increasing")


@dataclass(frozen=True)
class SecondOrderInfo:
    """Derived characteristics of the active (second-order) closed loop."""

    omega_n: float
    xi: float
    t_s_rule: float  # 4 / (xi * omega_n)


@dataclass(frozen=True)
class FirstOrderInfo:
    """Derived characteristics of the reactive (first-order) closed loop."""

    y_inf: float   # steady-state value for a unit step reference
    e_inf: float   # steady-state error fraction
    tau: float     # time constant, s
    pole: float    # rad/s (negative)


def control_tf_p(gains: VsgGains) -> TransferFunction:
    """Active control law: K_ip / (s^2 + D_p K_ip s)."""
    return TransferFunction(num=(gains.k_ip,), den=(0.0, gains.d_p * gains.k_ip, 1.0))


def control_tf_q(gains: VsgGains) -> TransferFunction:
    """Reactive control law: K_iq / (s + D_q K_iq)."""
    return TransferFunction(num=(gains.k_iq,), den=(gains.d_q * gains.k_iq, 1.0))


def open_loop_p(gains: VsgGains, jac_a: float) -> TransferFunction:
    """Active open loop: control law times the static P-delta gain A."""
    if jac_a <= 0.0:
        raise DesignRegionError(f"A must be > 0, got {jac_a}")
    return control_tf_p(gains).scaled(jac_a)


def open_loop_q(gains: VsgGains, jac_d: float) -> TransferFunction:
    """Reactive open loop: control law times the static Q-V gain D."""
    if jac_d <= 0.0:
        raise DesignRegionError(f"D must be > 0, got {jac_d}")
    return control_tf_q(gains).scaled(jac_d)


def closed_loop_p(gains: VsgGains, jac_a: float) -> TransferFunction:
    """Active closed loop: K_ip A / (s^2 + D_p K_ip s + K_ip A)."""
    if jac_a <= 0.0:
        raise DesignRegionError(f"A must be > 0, got {jac_a}")
    ka = gains.k_ip * jac_a
    return TransferFunction(num=(ka,), den=(ka, gains.d_p * gains.k_ip, 1.0))


def p_loop_info(gains: VsgGains, jac_a: float) -> SecondOrderInfo:
    if jac_a <= 0.0:
        raise DesignRegionError(f"A must be > 0, got {jac_a}")
    omega_n = math.sqrt(gains.k_ip * jac_a)
    xi = gains.d_p * gains.k_ip / (2.0 * omega_n)
    return SecondOrderInfo(omega_n=omega_n, xi=xi, t_s_rule=4.0 / (xi * omega_n))


def closed_loop_q(gains: VsgGains, jac_d: float) -> TransferFunction:
    """Reactive closed loop: K_iq D / (s + (D_q + D) K_iq)."""
    if jac_d <= 0.0:
        raise DesignRegionError(f"D must be > 0, got {jac_d}")
    return TransferFunction(num=(gains.k_iq * jac_d,),
                            den=((gains.d_q + jac_d) * gains.k_iq, 1.0))


def q_loop_info(gains: VsgGains, jac_d: float) -> FirstOrderInfo:
    if jac_d <= 0.0:
        raise DesignRegionError(f"D must be > 0, got {jac_d}")
    total = gains.d_q + jac_d
    return FirstOrderInfo(
        y_inf=jac_d / total,
        e_inf=gains.d_q / total,
        tau=1.0 / (gains.k_iq * total),
        pole=-gains.k_iq * total,
    )


def schedule_gains(jac, targets: DesignTargets = DesignTargets()) -> VsgGains:
    """Recompute the four VSG gains from the Jacobian entries A and D.

    Active loop: omega_n = 4/(xi*Ts), K_ip = omega_n^2/A, D_p = 2 xi omega_n / K_ip
    (A/2 and 16/A for the default targets).  Reactive loop: D_q = D/divisor,
    K_iq = (4/Ts)/(D + D_q).
    """
    a, d = jac.a, jac.d
    if not (a > 0.0 and math.isfinite(a)):
        raise SchedulingError(f"Jacobian entry A must be > 0, got {a}")
    if not (d > 0.0 and math.isfinite(d)):
        raise SchedulingError(f"Jacobian entry D must be > 0, got {d}")
    omega_n = 4.0 / (targets.xi * targets.t_s)
    k_ip = omega_n * omega_n / a
    d_p = 2.0 * targets.xi * omega_n / k_ip
    d_q = d / targets.q_droop_divisor
    k_iq = (4.0 / targets.t_s) / (d + d_q)
    return VsgGains(d_p=d_p, k_ip=k_ip, d_q=d_q, k_iq=k_iq)


def default_omega_grid(n: int = 400, lo: float = 1e-2, hi: float = 1e3) -> np.ndarray:
    return np.logspace(math.log10(lo), math.log10(hi), n)


def bode(tf: TransferFunction, omega: np.ndarray | None = None) -> FrequencyResponse:
    """Magnitude (dB) and unwrapped phase (deg) of tf(j omega)."""
    if omega is None:
        omega = default_omega_grid()
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0) or np.any(np.diff(omega) <= 0):
        raise ValueError("omega grid must be positive and strictly increasing")
    s = 1j * omega
    num = np.polynomial.polynomial.polyval(s, np.asarray(tf.num))
    den = np.polynomial.polynomial.polyval(s, np.asarray(tf.den))
    if np.any(den == 0):
        raise ExcludedPointError("grid point coincides with an imaginary-axis pole")
    h = num / den
    mag_db = 20.0 * np.log10(np.abs(h))
    phase_deg = np.degrees(np.unwrap(np.angle(h)))
    return FrequencyResponse(omega=omega, mag_db=mag_db, phase_deg=phase_deg)


def phase_margin(fr: FrequencyResponse) -> float:
    """180 deg + phase at the gain crossover (linear interp in log-omega/dB)."""
    mag = fr.mag_db
    crossings = np.nonzero(np.diff(np.sign(mag)) != 0)[0]
    exact = np.nonzero(mag == 0.0)[0]
    if exact.size:
        i = exact[-1]
        return 180.0 + float(fr.phase_deg[i])
    if crossings.size == 0:
        raise NoCrossoverError("magnitude response never crosses 0 dB on the grid")
    i = crossings[-1]
    logw = np.log10(fr.omega)
    frac = mag[i] / (mag[i] - mag[i + 1])
    logwc = logw[i] + frac * (logw[i + 1] - logw[i])
    phase = fr.phase_deg[i] + (logwc - logw[i]) / (logw[i + 1] - logw[i]) * (
        fr.phase_deg[i + 1] - fr.phase_deg[i])
    return 180.0 + float(phase)


def write_frequency_response_csv(fr: FrequencyResponse, path: str | Path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["omega_rad_s", "mag_db", "phase_deg"])
        for om, mg, ph in zip(fr.omega, fr.mag_db, fr.phase_deg):
            w.writerow([f"{om:.12g}", f"{mg:.12g}", f"{ph:.12g}"])
