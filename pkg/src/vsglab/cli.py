"""Command-line front end.

Subcommands: gains, bode, dataset, train, simulate, evaluate, paper-repro.
Each reads flags and/or a JSON scenario config, writes CSV/report files,
and exits nonzero on error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import ann, presets
from .estimator import EstimateRecord, write_estimate_log_csv
from .grid import (JacobianPQ, scr_to_impedance, solve_operating_point, jacobian)
from .report import build_comparison, render_text, write_csv
from .sim import (SimConfig, ScenarioEvent, TimeSeries, run_scenario,
                  load_scenario, save_scenario)
from .smallsignal import (DesignTargets, VsgGains, schedule_gains, open_loop_p,
                          bode, phase_margin, p_loop_info, q_loop_info,
                          write_frequency_response_csv)


def _jac_from_grid(scr: float, xr: float, p: float, q: float,
                   v_g: float, s_rated: float) -> JacobianPQ:
    z = scr_to_impedance(scr, xr, v_g, s_rated)
    op = solve_operating_point(p, q, z, v_g)
    return jacobian(op, z)


def cmd_gains(args) -> int:
    if args.a is not None and args.d is not None:
        jac = JacobianPQ(a=args.a, b=0.0, c=0.0, d=args.d)
    else:
        jac = _jac_from_grid(args.scr, args.xr, args.p, args.q, args.vg, args.srated)
    targets = DesignTargets(t_s=args.ts, xi=args.xi, q_droop_divisor=args.divisor)
    g = schedule_gains(jac, targets)
    pinfo = p_loop_info(g, jac.a)
    qinfo = q_loop_info(g, jac.d)
    print(f"A    = {jac.a:.6g} W/rad")
    print(f"D    = {jac.d:.6g} var/V")
    print(f"D_p  = {g.d_p:.6g}")
    print(f"K_ip = {g.k_ip:.6g}")
    print(f"D_q  = {g.d_q:.6g}")
    print(f"K_iq = {g.k_iq:.6g}")
    print(f"P loop: omega_n = {pinfo.omega_n:.6g} rad/s, xi = {pinfo.xi:.6g}, "
          f"Ts(rule) = {pinfo.t_s_rule:.6g} s")
    print(f"Q loop: tau = {qinfo.tau:.6g} s, steady-state error = {qinfo.e_inf:.4%}")
    return 0


def cmd_bode(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scrs = [float(s) for s in args.scr_list.split(",")]
    margins = []
    for scr in scrs:
        jac = _jac_from_grid(scr, args.xr, args.p, args.q, args.vg, args.srated)
        if args.scheduled:
            g = schedule_gains(jac)
            tag = "scheduled"
        else:
            g = presets.BASELINE_GAINS
            tag = "fixed"
        fr = bode(open_loop_p(g, jac.a))
        pm = phase_margin(fr)
        margins.append((scr, pm))
        write_frequency_response_csv(fr, out / f"bode_p_{tag}_scr{scr:g}.csv")
    for scr, pm in margins:
        print(f"SCR {scr:g}: phase margin {pm:.3f} deg")
    return 0


def cmd_dataset(args) -> int:
    cfg = ann.DatasetConfig(n_samples=args.n, seed=args.seed, noise_std=args.noise)
    ds = ann.generate_dataset(cfg)
    ann.save_dataset_csv(args.out, ds)
    print(f"wrote {len(ds)} samples to {args.out}")
    return 0


def cmd_train(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ds = ann.load_dataset_csv(args.dataset)
    tr, va, te = ann.split_dataset(ds, seed=args.seed)
    cfg = ann.TrainConfig(seed=args.seed)
    t0 = time.perf_counter()
    model, norm, report = ann.train_on_dataset(tr, va, te, cfg)
    dt = time.perf_counter() - t0
    ann.save_model(out / "model.json", model, norm, cfg.fingerprint())
    ann.export_diagnostics(report, out)
    print(f"trained {report.epochs_run} epochs in {dt:.1f} s, stop: {report.stop_reason}")
    print(f"final MSE train/val/test = {report.train_mse[-1]:.3e} / "
          f"{report.val_mse[-1]:.3e} / {report.test_mse[-1]:.3e}")
    for name, (slope, intercept, r) in report.regression.items():
        print(f"regression {name}: slope {slope:.5f}, intercept {intercept:.2e}, R {r:.6f}")
    return 0


def cmd_simulate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.config:
        cfg, events = load_scenario(args.config)
        if args.mode:
            cfg = SimConfig(**{**cfg.__dict__, "mode": args.mode})
    else:
        cfg = presets.benchmark_config(args.mode or "cvsg", seed=args.seed)
        events = presets.benchmark_events()
    model = norm = None
    if cfg.mode == "avsg" and cfg.estimator_kind == "ann":
        if not args.model:
            print("error: avsg mode needs --model", file=sys.stderr)
            return 2
        model, norm = ann.load_model(args.model)
    result = run_scenario(cfg, events, model=model, norm=norm)
    result.series.to_csv(out / f"timeseries_{cfg.mode}.csv")
    if result.estimates:
        write_estimate_log_csv(out / "estimates.csv", result.estimates)
    print(f"wrote {len(result.series)} rows to {out / f'timeseries_{cfg.mode}.csv'}")
    return 0


def _truth_schedule(cfg: SimConfig, events: list[ScenarioEvent]):
    z0 = scr_to_impedance(cfg.scr, cfg.xr_ratio, cfg.v_g, cfg.s_rated, cfg.omega0)
    sched = [(0.0, z0.r_g, z0.l_g)]
    for ev in sorted(events, key=lambda e: e.time):
        if ev.kind == "set_scr":
            xr = ev.xr_ratio if ev.xr_ratio is not None else cfg.xr_ratio
            z = scr_to_impedance(ev.value, xr, cfg.v_g, cfg.s_rated, cfg.omega0)
            sched.append((ev.time, z.r_g, z.l_g))
    return sched


def _read_estimate_log(path) -> list[tuple[EstimateRecord, float, float, bool]]:
    rows = []
    with open(path, newline="") as f:
        for rec in csv.DictReader(f):
            t = float(rec["t"])
            rows.append((EstimateRecord(t=t, r_g_hat=float(rec["r_g_hat"]),
                                        l_g_hat=float(rec["l_g_hat"]),
                                        window_start=t - 0.02, window_end=t),
                         float(rec["r_g_true"]), float(rec["l_g_true"]),
                         bool(int(rec["applied"]))))
    return rows


def cmd_evaluate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg, events = load_scenario(args.scenario) if args.scenario else (
        presets.benchmark_config("avsg"), presets.benchmark_events())
    cvsg = TimeSeries.from_csv(args.cvsg)
    avsg = TimeSeries.from_csv(args.avsg)
    estimates = _read_estimate_log(args.estimates) if args.estimates else []
    rep = build_comparison(cvsg, avsg, events, estimates,
                           _truth_schedule(cfg, events), cfg.targets)
    text = render_text(rep)
    (out / "report.txt").write_text(text)
    write_csv(rep, out / "report.csv")
    print(text)
    return 0 if rep.passed else 1


def run_paper_repro(outdir: Path, seed: int = 0, model_path: Path | None = None,
                    quick: bool = False) -> "object":
    """Full benchmark pipeline: dataset, training, both modes, comparison.

    Returns the ComparisonReport.  `quick` shrinks the dataset and coarsens
    the integration step for smoke runs.
    """
    outdir.mkdir(parents=True, exist_ok=True)
    n = 600 if quick else 5000
    dt_sim = 200e-6 if quick else 50e-6

    if model_path is None:
        ds_cfg = ann.DatasetConfig(n_samples=n, seed=seed)
        ds = ann.generate_dataset(ds_cfg)
        ann.save_dataset_csv(outdir / "dataset.csv", ds)
        tr, va, te = ann.split_dataset(ds, seed=seed)
        t_cfg = ann.TrainConfig(seed=seed)
        model, norm, t_report = ann.train_on_dataset(tr, va, te, t_cfg)
        ann.save_model(outdir / "model.json", model, norm, t_cfg.fingerprint())
        ann.export_diagnostics(t_report, outdir)
    else:
        model, norm = ann.load_model(model_path)

    events = presets.benchmark_events()
    cfg_c = presets.benchmark_config("cvsg", seed=seed, dt_sim=dt_sim)
    cfg_a = presets.benchmark_config("avsg", seed=seed, dt_sim=dt_sim)
    save_scenario(outdir / "scenario_avsg.json", cfg_a, events)
    res_c = run_scenario(cfg_c, events)
    res_a = run_scenario(cfg_a, events, model=model, norm=norm)
    res_c.series.to_csv(outdir / "timeseries_cvsg.csv")
    res_a.series.to_csv(outdir / "timeseries_avsg.csv")
    write_estimate_log_csv(outdir / "estimates.csv", res_a.estimates)

    rep = build_comparison(res_c.series, res_a.series, events, res_a.estimates,
                           _truth_schedule(cfg_a, events), cfg_a.targets)
    (outdir / "report.txt").write_text(render_text(rep))
    write_csv(rep, outdir / "report.csv")
    return rep


def cmd_paper_repro(args) -> int:
    rep = run_paper_repro(Path(args.out), seed=args.seed,
                          model_path=Path(args.model) if args.model else None,
                          quick=args.quick)
    print(render_text(rep))
    return 0 if rep.passed else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vsglab",
                                description="VSG adaptive gain scheduling toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gains", help="scheduled gains and predicted loop metrics")
    g.add_argument("--a", type=float, help="static P-delta gain A [W/rad]")
    g.add_argument("--d", type=float, help="static Q-V gain D [var/V]")
    g.add_argument("--scr", type=float, default=2.0)
    g.add_argument("--xr", type=float, default=presets.XR_RATIO_DEFAULT)
    g.add_argument("--p", type=float, default=2000.0)
    g.add_argument("--q", type=float, default=1000.0)
    g.add_argument("--vg", type=float, default=presets.V_G)
    g.add_argument("--srated", type=float, default=presets.S_RATED)
    g.add_argument("--ts", type=float, default=1.0)
    g.add_argument("--xi", type=float, default=1.0)
    g.add_argument("--divisor", type=float, default=100.0)
    g.set_defaults(func=cmd_gains)

    b = sub.add_parser("bode", help="open-loop Bode curves and phase margins over SCRs")
    b.add_argument("--scr-list", default="2,8,20")
    b.add_argument("--scheduled", action="store_true",
                   help="use scheduled gains instead of the fixed baseline")
    b.add_argument("--xr", type=float, default=presets.XR_RATIO_DEFAULT)
    b.add_argument("--p", type=float, default=2000.0)
    b.add_argument("--q", type=float, default=1000.0)
    b.add_argument("--vg", type=float, default=presets.V_G)
    b.add_argument("--srated", type=float, default=presets.S_RATED)
    b.add_argument("--out", default="out")
    b.set_defaults(func=cmd_bode)

    d = sub.add_parser("dataset", help="generate a training dataset CSV")
    d.add_argument("--out", required=True)
    d.add_argument("--n", type=int, default=5000)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--noise", type=float, default=0.0)
    d.set_defaults(func=cmd_dataset)

    t = sub.add_parser("train", help="train the impedance estimator")
    t.add_argument("--dataset", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--seed", type=int, default=0)
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("simulate", help="run a scenario and write the trace CSV")
    s.add_argument("--config", help="scenario JSON (defaults to the 60 s benchmark)")
    s.add_argument("--mode", choices=["cvsg", "avsg"])
    s.add_argument("--model", help="model JSON for avsg mode")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="out")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("evaluate", help="comparison report from saved traces")
    e.add_argument("--cvsg", required=True)
    e.add_argument("--avsg", required=True)
    e.add_argument("--estimates")
    e.add_argument("--scenario")
    e.add_argument("--out", default="out")
    e.set_defaults(func=cmd_evaluate)

    r = sub.add_parser("paper-repro",
                       help="full pipeline: dataset, training, both modes, report")
    r.add_argument("--out", default="out/repro")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--model", help="reuse an existing model instead of training")
    r.add_argument("--quick", action="store_true",
                   help="small dataset and coarse step for smoke runs")
    r.set_defaults(func=cmd_paper_repro)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
