"""From-scratch MLP and Levenberg-Marquardt trainer for impedance estimation.

The production network is 200 -> 8 -> 2 (tansig hidden, linear output),
mapping one cycle of sampled PCC voltage and current (100 + 100 points at
200 us) to (R_g, L_g).  Inputs and targets are z-scored with statistics
fitted on the training split only.  Training is full-batch LM with the
standard accept/reject damping schedule and validation-check early
stopping.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .grid import scr_to_impedance, solve_operating_point, InfeasibleOperatingPointError

MODEL_FILE_VERSION = 1


class TrainingFailureError(RuntimeError):
    """Training diverged; the partial report is attached as `.report`."""

    def __init__(self, message: str, report: "TrainReport | None" = None):
        super().__init__(message)
        self.report = report


class NormalizationError(ValueError):
    """A feature or target has zero variance on the fit split."""


def tansig(x):
    """Hyperbolic-tangent sigmoid, 2/(1+exp(-2x)) - 1 == tanh(x)."""
    return np.tanh(x)


_ACTIVATIONS = {
    "tansig": (tansig, lambda a: 1.0 - a * a),   # derivative in terms of output
    "linear": (lambda x: x, lambda a: np.ones_like(a)),
}


@dataclass
class MlpModel:
    """Single-hidden-layer perceptron; weights are float64 arrays."""

    w1: np.ndarray  # (hidden, inputs)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (outputs, hidden)
    b2: np.ndarray  # (outputs,)
    hidden_activation: str = "tansig"
    output_activation: str = "linear"

    def __post_init__(self) -> None:
        self.w1 = np.asarray(self.w1, dtype=float)
        self.b1 = np.asarray(self.b1, dtype=float)
        self.w2 = np.asarray(self.w2, dtype=float)
        self.b2 = np.asarray(self.b2, dtype=float)
        h, n_in = self.w1.shape
        n_out = self.w2.shape[0]
        if self.b1.shape != (h,) or self.w2.shape != (n_out, h) or self.b2.shape != (n_out,):
            raise ValueError("inconsistent weight dimensions")
        for name in (self.hidden_activation, self.output_activation):
            if name not in _ACTIVATIONS:
                raise ValueError(f"unknown activation {name!r}")

    @property
    def n_params(self) -> int:
        return self.w1.size + self.b1.size + self.w2.size + self.b2.size

    def copy(self) -> "MlpModel":
        return MlpModel(self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2.copy(),
                        self.hidden_activation, self.output_activation)

    def flat_weights(self) -> np.ndarray:
        return np.concatenate([self.w1.ravel(), self.b1, self.w2.ravel(), self.b2])

    def with_flat_weights(self, w: np.ndarray) -> "MlpModel":
        i = 0
        parts = []
        for arr in (self.w1, self.b1, self.w2, self.b2):
            parts.append(w[i:i + arr.size].reshape(arr.shape))
            i += arr.size
        return MlpModel(*parts, self.hidden_activation, self.output_activation)


def init_model(n_in: int, n_hidden: int, n_out: int, seed: int,
               hidden_activation: str = "tansig") -> MlpModel:
    """Seeded uniform init in [-0.5, 0.5] scaled by 1/sqrt(fan_in)."""
    rng = np.random.default_rng(seed)
    w1 = rng.uniform(-0.5, 0.5, (n_hidden, n_in)) / math.sqrt(n_in)
    b1 = rng.uniform(-0.5, 0.5, n_hidden)
    w2 = rng.uniform(-0.5, 0.5, (n_out, n_hidden)) / math.sqrt(n_hidden)
    b2 = rng.uniform(-0.5, 0.5, n_out)
    return MlpModel(w1, b1, w2, b2, hidden_activation=hidden_activation)


def forward(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """Network output for a single input vector or an (N, n_in) batch."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xb = x[None, :] if single else x
    if xb.shape[1] != model.w1.shape[1]:
        raise ValueError(f"expected {model.w1.shape[1]} inputs, got {xb.shape[1]}")
    act_h = _ACTIVATIONS[model.hidden_activation][0]
    act_o = _ACTIVATIONS[model.output_activation][0]
    a1 = act_h(xb @ model.w1.T + model.b1)
    out = act_o(a1 @ model.w2.T + model.b2)
    return out[0] if single else out


def _jacobian_blocks(model: MlpModel, x: np.ndarray):
    """Shared forward pass returning (a1, residual-free out, hidden derivative)."""
    act_h, dact_h = _ACTIVATIONS[model.hidden_activation]
    act_o, dact_o = _ACTIVATIONS[model.output_activation]
    a1 = act_h(x @ model.w1.T + model.b1)        # (N, H)
    z2 = a1 @ model.w2.T + model.b2              # (N, K)
    out = act_o(z2)
    return a1, out, dact_h(a1), dact_o(out)


def error_jacobian(model: MlpModel, x: np.ndarray, y: np.ndarray
                   ) -> tuple[np.ndarray, np.ndarray]:
    """Residual Jacobian for a batch, by reverse-mode accumulation.

    Returns (J, e) with one row per (sample, output) residual, sample-major,
    and columns ordered [w1 row-major, b1, w2 row-major, b2].
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if x.shape[0] == 0:
        raise ValueError("batch must be nonempty")
    n, n_in = x.shape
    h = model.w1.shape[0]
    k = model.w2.shape[0]
    a1, out, g1, g2 = _jacobian_blocks(model, x)
    e = (out - y).reshape(n * k)
    # sensitivity of output k to hidden pre-activation j: g2[n,k]*W2[k,j]*g1[n,j]
    s = g2[:, :, None] * model.w2[None, :, :] * g1[:, None, :]   # (N, K, H)
    j_w1 = (s[:, :, :, None] * x[:, None, None, :]).reshape(n * k, h * n_in)
    j_b1 = s.reshape(n * k, h)
    j_w2 = np.zeros((n, k, k, h))
    idx = np.arange(k)
    j_w2[:, idx, idx, :] = g2[:, :, None] * a1[:, None, :]
    j_w2 = j_w2.reshape(n * k, k * h)
    j_b2 = np.zeros((n, k, k))
    j_b2[:, idx, idx] = g2
    j_b2 = j_b2.reshape(n * k, k)
    return np.hstack([j_w1, j_b1, j_w2, j_b2]), e


def _accumulate_normal_equations(model: MlpModel, x: np.ndarray, y: np.ndarray,
                                 chunk: int = 512):
    """(J^T J, J^T e, SSE) accumulated over sample chunks in a fixed order."""
    n_params = model.n_params
    g = np.zeros((n_params, n_params))
    v = np.zeros(n_params)
    sse = 0.0
    for lo in range(0, x.shape[0], chunk):
        j, e = error_jacobian(model, x[lo:lo + chunk], y[lo:lo + chunk])
        g += j.T @ j
        v += j.T @ e
        sse += float(e @ e)
    return g, v, sse


def lm_step(model: MlpModel, x: np.ndarray, y: np.ndarray, mu: float) -> MlpModel:
    """One Levenberg-Marquardt update: w -= (J^T J + mu I)^-1 J^T e."""
    if mu <= 0.0:
        raise ValueError(f"mu must be > 0, got {mu}")
    g, v, _ = _accumulate_normal_equations(model, np.atleast_2d(x), np.atleast_2d(y))
    g[np.diag_indices_from(g)] += mu
    try:
        delta = cho_solve(cho_factor(g, lower=True), v)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - needs pathological input
        raise FloatingPointError(f"damped normal equations not SPD at mu={mu}") from exc
    return model.with_flat_weights(model.flat_weights() - delta)


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 500
    goal_mse: float = 1e-5
    mu_init: float = 1e-6
    mu_decrease: float = 0.1
    mu_increase: float = 10.0
    mu_max: float = 1e10
    val_patience: int = 6
    seed: int = 0
    n_hidden: int = 8

    def __post_init__(self) -> None:
        if not (0 < self.mu_decrease < 1 < self.mu_increase):
            raise ValueError("require mu_decrease < 1 < mu_increase")
        if self.mu_init <= 0 or self.mu_max <= 0 or self.goal_mse <= 0:
            raise ValueError("mu and goal must be positive")

    def fingerprint(self) -> str:
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class Normalizer:
    """Per-feature z-score statistics fitted on the training split.

    Targets are optionally log-transformed before z-scoring
    (`target_transform="log"`, the default): impedances span nearly a
    decade per unit of SCR, and the log geometry extrapolates far better
    to grids outside the training range.
    """

    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: np.ndarray
    y_std: np.ndarray
    target_transform: str = "log"

    def __post_init__(self) -> None:
        for s in (self.x_std, self.y_std):
            if np.any(np.asarray(s) <= 0):
                raise NormalizationError("standard deviations must be > 0")
        if self.target_transform not in ("log", "identity"):
            raise ValueError(f"unknown target_transform {self.target_transform!r}")

    @classmethod
    def fit(cls, x: np.ndarray, y: np.ndarray,
            target_transform: str = "log") -> "Normalizer":
        if target_transform == "log":
            if np.any(y <= 0):
                raise NormalizationError("log target transform needs positive targets")
            y = np.log(y)
        x_mean, x_std = x.mean(axis=0), x.std(axis=0)
        y_mean, y_std = y.mean(axis=0), y.std(axis=0)
        # essentially-constant columns make z-scores explode
        if (np.any(x_std <= 1e-12 * np.maximum(np.abs(x_mean), 1.0))
                or np.any(y_std <= 1e-12 * np.maximum(np.abs(y_mean), 1.0))):
            raise NormalizationError("constant feature or target on the fit split")
        return cls(x_mean, x_std, y_mean, y_std, target_transform)

    def transform_x(self, x: np.ndarray) -> np.ndarray:
        return (x - self.x_mean) / self.x_std

    def inverse_x(self, xn: np.ndarray) -> np.ndarray:
        return xn * self.x_std + self.x_mean

    def transform_y(self, y: np.ndarray) -> np.ndarray:
        if self.target_transform == "log":
            y = np.log(y)
        return (y - self.y_mean) / self.y_std

    def inverse_y(self, yn: np.ndarray) -> np.ndarray:
        y = yn * self.y_std + self.y_mean
        return np.exp(y) if self.target_transform == "log" else y


def zscore(x: np.ndarray, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
    std = np.asarray(std, dtype=float)
    if np.any(std <= 0):
        raise NormalizationError("standard deviations must be > 0")
    return (np.asarray(x, dtype=float) - mean) / std


def zscore_inverse(xn: np.ndarray, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
    return np.asarray(xn, dtype=float) * std + mean


@dataclass
class Dataset:
    """Waveform windows and impedance targets, with generation metadata."""

    inputs: np.ndarray    # (N, 200): 100 voltage then 100 current samples
    targets: np.ndarray   # (N, 2): R_g [ohm], L_g [H]
    scr: np.ndarray       # (N,)
    xr_ratio: np.ndarray  # (N,)
    p_ref: np.ndarray     # (N,)
    q_ref: np.ndarray     # (N,)
    t0: np.ndarray        # (N,) window start phase time, s

    def __post_init__(self) -> None:
        n = self.inputs.shape[0]
        for name in ("targets", "scr", "xr_ratio", "p_ref", "q_ref", "t0"):
            if getattr(self, name).shape[0] != n:
                raise ValueError(f"field {name} length mismatch")
        if not np.all(np.isfinite(self.inputs)) or not np.all(np.isfinite(self.targets)):
            raise ValueError("dataset contains non-finite entries")

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def take(self, idx: np.ndarray) -> "Dataset":
        return Dataset(self.inputs[idx], self.targets[idx], self.scr[idx],
                       self.xr_ratio[idx], self.p_ref[idx], self.q_ref[idx], self.t0[idx])


@dataclass(frozen=True)
class DatasetConfig:
    scr_values: tuple[float, ...] = (2.0, 4.5, 7.0, 9.5, 15.0)
    xr_values: tuple[float, ...] = (5.0,)
    p_frac_range: tuple[float, float] = (0.2, 0.8)   # of s_rated
    q_frac_range: tuple[float, float] = (0.0, 0.4)
    n_samples: int = 5000
    v_g: float = 110.0
    s_rated: float = 5000.0
    omega0: float = 100.0 * math.pi
    window_len: int = 100
    sample_dt: float = 200e-6
    # "aligned": windows start where the online tumbling buffer does (first
    # sample one period into the cycle); "random": uniform start phase.
    window_phase: str = "aligned"
    noise_std: float = 0.0   # additive Gaussian, volts/amps
    seed: int = 0

    def __post_init__(self) -> None:
        if self.window_phase not in ("aligned", "random"):
            raise ValueError("window_phase must be 'aligned' or 'random'")


def generate_dataset(cfg: DatasetConfig) -> Dataset:
    """Steady-state windows over randomized SCR / operating point / phase."""
    from .sim import synth_waveforms  # local import: sim depends on this module

    if cfg.n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(cfg.seed)
    cycle = 2.0 * math.pi / cfg.omega0
    n = cfg.n_samples
    inputs = np.empty((n, 2 * cfg.window_len))
    targets = np.empty((n, 2))
    scr_col = np.empty(n)
    xr_col = np.empty(n)
    p_col = np.empty(n)
    q_col = np.empty(n)
    t0_col = np.empty(n)
    i = 0
    while i < n:
        scr = float(rng.choice(cfg.scr_values))
        xr = float(rng.choice(cfg.xr_values))
        p_ref = float(rng.uniform(*cfg.p_frac_range)) * cfg.s_rated
        q_ref = float(rng.uniform(*cfg.q_frac_range)) * cfg.s_rated
        if cfg.window_phase == "random":
            t0 = float(rng.uniform(0.0, cycle))
        else:
            t0 = cfg.sample_dt
        z = scr_to_impedance(scr, xr, cfg.v_g, cfg.s_rated, cfg.omega0)
        try:
            op = solve_operating_point(p_ref, q_ref, z, cfg.v_g)
        except InfeasibleOperatingPointError:
            continue  # resample
        v_s, i_s = synth_waveforms(op, z, cfg.window_len, cfg.sample_dt, t0)
        if cfg.noise_std > 0.0:
            v_s = v_s + rng.normal(0.0, cfg.noise_std, cfg.window_len)
            i_s = i_s + rng.normal(0.0, cfg.noise_std, cfg.window_len)
        inputs[i, :cfg.window_len] = v_s
        inputs[i, cfg.window_len:] = i_s
        targets[i] = (z.r_g, z.l_g)
        scr_col[i], xr_col[i] = scr, xr
        p_col[i], q_col[i], t0_col[i] = p_ref, q_ref, t0
        i += 1
    return Dataset(inputs, targets, scr_col, xr_col, p_col, q_col, t0_col)


def split_dataset(ds: Dataset, fractions: tuple[float, float, float] = (0.7, 0.15, 0.15),
                  seed: int = 0) -> tuple[Dataset, Dataset, Dataset]:
    """Seeded shuffle, then contiguous train/val/test split."""
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("fractions must sum to 1")
    n = len(ds)
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    if n_train == 0 or n_val == 0 or n - n_train - n_val == 0:
        raise ValueError("a split would be empty")
    return (ds.take(perm[:n_train]), ds.take(perm[n_train:n_train + n_val]),
            ds.take(perm[n_train + n_val:]))


@dataclass
class TrainReport:
    train_mse: list[float] = field(default_factory=list)
    val_mse: list[float] = field(default_factory=list)
    test_mse: list[float] = field(default_factory=list)
    grad_norm: list[float] = field(default_factory=list)
    mu: list[float] = field(default_factory=list)
    val_checks: list[int] = field(default_factory=list)
    stop_reason: str = ""
    epochs_run: int = 0
    # populated at the end of training
    hist_bin_edges: np.ndarray | None = None
    hist_counts: dict[str, np.ndarray] = field(default_factory=dict)
    regression: dict[str, tuple[float, float, float]] = field(default_factory=dict)  # slope, intercept, r
    scatter: dict[str, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)


def _mse(model: MlpModel, x: np.ndarray, y: np.ndarray) -> float:
    e = forward(model, x) - y
    return float(np.mean(e * e))


def _finalize_report(report: TrainReport, model: MlpModel,
                     splits: dict[str, tuple[np.ndarray, np.ndarray]],
                     n_bins: int = 20) -> None:
    errors = {name: (forward(model, x) - y).ravel() for name, (x, y) in splits.items()}
    all_err = np.concatenate(list(errors.values()))
    edges = np.histogram_bin_edges(all_err, bins=n_bins)
    report.hist_bin_edges = edges
    for name, (x, y) in splits.items():
        report.hist_counts[name] = np.histogram(errors[name], bins=edges)[0]
        t = y.ravel()
        p = forward(model, x).ravel()
        slope, intercept = np.polyfit(t, p, 1)
        r = float(np.corrcoef(t, p)[0, 1])
        report.regression[name] = (float(slope), float(intercept), r)
        report.scatter[name] = (t, p)


def train(train_split: tuple[np.ndarray, np.ndarray],
          val_split: tuple[np.ndarray, np.ndarray],
          test_split: tuple[np.ndarray, np.ndarray],
          cfg: TrainConfig = TrainConfig(),
          model: MlpModel | None = None) -> tuple[MlpModel, TrainReport]:
    """Full-batch LM training on already-normalized splits.

    Callers normalize with a :class:`Normalizer` fitted on the training
    split; :func:`train_on_dataset` wraps both steps.
    """
    for name, (x, y) in (("train", train_split), ("val", val_split), ("test", test_split)):
        if np.atleast_2d(x).shape[0] == 0:
            raise ValueError(f"{name} split is empty")
    x_tr, y_tr = (np.atleast_2d(a) for a in train_split)
    if model is None:
        model = init_model(x_tr.shape[1], cfg.n_hidden, y_tr.shape[1], cfg.seed)
    splits = {"train": (x_tr, y_tr),
              "val": tuple(np.atleast_2d(a) for a in val_split),
              "test": tuple(np.atleast_2d(a) for a in test_split)}
    report = TrainReport()
    mu = cfg.mu_init
    mse = _mse(model, x_tr, y_tr)
    best_val = math.inf
    val_checks = 0
    n_res = x_tr.shape[0] * y_tr.shape[1]

    for epoch in range(cfg.max_epochs):
        g, v, sse = _accumulate_normal_equations(model, x_tr, y_tr)
        grad_norm = float(np.linalg.norm(2.0 * v / n_res))
        accepted = False
        while mu <= cfg.mu_max:
            gd = g.copy()
            gd[np.diag_indices_from(gd)] += mu
            try:
                delta = cho_solve(cho_factor(gd, lower=True), v)
            except np.linalg.LinAlgError:
                mu *= cfg.mu_increase
                continue
            candidate = model.with_flat_weights(model.flat_weights() - delta)
            cand_mse = _mse(candidate, x_tr, y_tr)
            if not math.isfinite(cand_mse):
                mu *= cfg.mu_increase
                continue
            if cand_mse < mse:
                model, mse = candidate, cand_mse
                mu = max(mu * cfg.mu_decrease, 1e-20)
                accepted = True
                break
            mu *= cfg.mu_increase
        if not math.isfinite(mse):
            raise TrainingFailureError("training loss diverged", report)

        vmse = _mse(model, *splits["val"])
        if vmse < best_val:
            best_val = vmse
            val_checks = 0
        else:
            val_checks += 1
        report.train_mse.append(mse)
        report.val_mse.append(vmse)
        report.test_mse.append(_mse(model, *splits["test"]))
        report.grad_norm.append(grad_norm)
        report.mu.append(mu)
        report.val_checks.append(val_checks)
        report.epochs_run = epoch + 1

        if mse <= cfg.goal_mse:
            report.stop_reason = "goal"
            break
        if not accepted:
            report.stop_reason = "mu_ceiling"
            break
        if val_checks >= cfg.val_patience:
            report.stop_reason = "val_patience"
            break
    else:
        report.stop_reason = "max_epochs"
    _finalize_report(report, model, splits)
    return model, report


def train_on_dataset(ds_train: Dataset, ds_val: Dataset, ds_test: Dataset,
                     cfg: TrainConfig = TrainConfig(),
                     target_transform: str = "log"
                     ) -> tuple[MlpModel, Normalizer, TrainReport]:
    """Fit the normalizer on the training split, z-score, and train."""
    norm = Normalizer.fit(ds_train.inputs, ds_train.targets, target_transform)
    mk = lambda d: (norm.transform_x(d.inputs), norm.transform_y(d.targets))
    model, report = train(mk(ds_train), mk(ds_val), mk(ds_test), cfg)
    return model, norm, report


def save_dataset_csv(path: str | Path, ds: Dataset) -> None:
    """CSV with 100 voltage + 100 current input columns, targets, metadata."""
    import csv

    n_win = ds.inputs.shape[1] // 2
    header = ([f"v_{j:03d}" for j in range(n_win)] + [f"i_{j:03d}" for j in range(n_win)]
              + ["r_g", "l_g", "scr", "xr_ratio", "p_ref", "q_ref", "t0"])
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for k in range(len(ds)):
            row = list(ds.inputs[k]) + list(ds.targets[k]) + [
                ds.scr[k], ds.xr_ratio[k], ds.p_ref[k], ds.q_ref[k], ds.t0[k]]
            w.writerow([f"{v:.17g}" for v in row])


def load_dataset_csv(path: str | Path) -> Dataset:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    n_win = (data.shape[1] - 7) // 2
    k = 2 * n_win
    return Dataset(inputs=data[:, :k], targets=data[:, k:k + 2],
                   scr=data[:, k + 2], xr_ratio=data[:, k + 3],
                   p_ref=data[:, k + 4], q_ref=data[:, k + 5], t0=data[:, k + 6])


# ---------------------------------------------------------------------------
# Persistence and diagnostics export
# ---------------------------------------------------------------------------

def save_model(path: str | Path, model: MlpModel, norm: Normalizer,
               config_fingerprint: str = "") -> None:
    doc = {
        "version": MODEL_FILE_VERSION,
        "dims": [model.w1.shape[1], model.w1.shape[0], model.w2.shape[0]],
        "hidden_activation": model.hidden_activation,
        "output_activation": model.output_activation,
        "w1": model.w1.ravel().tolist(),
        "b1": model.b1.tolist(),
        "w2": model.w2.ravel().tolist(),
        "b2": model.b2.tolist(),
        "x_mean": norm.x_mean.tolist(),
        "x_std": norm.x_std.tolist(),
        "y_mean": norm.y_mean.tolist(),
        "y_std": norm.y_std.tolist(),
        "target_transform": norm.target_transform,
        "train_config_fingerprint": config_fingerprint,
    }
    Path(path).write_text(json.dumps(doc))


def load_model(path: str | Path) -> tuple[MlpModel, Normalizer]:
    doc = json.loads(Path(path).read_text())
    if doc["version"] != MODEL_FILE_VERSION:
        raise ValueError(f"unsupported model file version {doc['version']}")
    n_in, h, k = doc["dims"]
    model = MlpModel(
        np.array(doc["w1"]).reshape(h, n_in), np.array(doc["b1"]),
        np.array(doc["w2"]).reshape(k, h), np.array(doc["b2"]),
        doc["hidden_activation"], doc["output_activation"])
    norm = Normalizer(np.array(doc["x_mean"]), np.array(doc["x_std"]),
                      np.array(doc["y_mean"]), np.array(doc["y_std"]),
                      doc.get("target_transform", "identity"))
    return model, norm


def export_diagnostics(report: TrainReport, outdir: str | Path) -> list[Path]:
    """Write training-trace, histogram, and regression CSVs; returns paths."""
    import csv

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []

    p = outdir / "training_trace.csv"
    with open(p, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["epoch", "train_mse", "val_mse", "test_mse", "grad_norm", "mu", "val_checks"])
        for i in range(report.epochs_run):
            w.writerow([i + 1, f"{report.train_mse[i]:.12g}", f"{report.val_mse[i]:.12g}",
                        f"{report.test_mse[i]:.12g}", f"{report.grad_norm[i]:.12g}",
                        f"{report.mu[i]:.12g}", report.val_checks[i]])
    paths.append(p)

    p = outdir / "error_histogram.csv"
    with open(p, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["split", "bin_left", "bin_right", "count"])
        for name, counts in report.hist_counts.items():
            for j, cnt in enumerate(counts):
                w.writerow([name, f"{report.hist_bin_edges[j]:.12g}",
                            f"{report.hist_bin_edges[j + 1]:.12g}", int(cnt)])
    paths.append(p)

    p = outdir / "regression.csv"
    with open(p, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["split", "slope", "intercept", "r"])
        for name, (slope, intercept, r) in report.regression.items():
            w.writerow([name, f"{slope:.12g}", f"{intercept:.12g}", f"{r:.12g}"])
    paths.append(p)

    p = outdir / "regression_scatter.csv"
    with open(p, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["split", "target", "prediction"])
        for name, (t, pr) in report.scatter.items():
            for tv, pv in zip(t, pr):
                w.writerow([name, f"{tv:.12g}", f"{pv:.12g}"])
    paths.append(p)
    return paths
