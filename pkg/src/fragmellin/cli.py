"""Command-line interface: simulate / profile / estimate / roundtrip / mellin.

Exit codes: 0 success, 2 validation error (bad config or input), 3 numerical
failure inside a stage.  Every run writes run.json echoing the full config.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .config import RunConfig, derive_rng, parse_config, write_run_json
from .estimation import (
    estimate_alpha,
    estimate_gamma_mellin,
    estimate_gamma_moments,
    recover_K0_line,
    reconstruct_k0,
    roundtrip,
)
from .forward import TimeSeries, rescale_snapshot, simulate
from .grids import GridFunction, make_log_grid
from .mellin import Taper, mellin_forward
from .spectral import SpectralConfig, default_config, spectral_profile


class ValidationError(Exception):
    pass


def _spectral_cfg(cfg: RunConfig) -> SpectralConfig:
    base = default_config(cfg.rate(), rho=cfg.rho, V_eval=cfg.V_eval)
    overrides = {}
    if cfg.s0 is not None:
        overrides["s0"] = cfg.s0
        overrides["u_eval"] = cfg.s0 + 0.5 * cfg.gamma
    if cfg.V is not None:
        overrides["V"] = cfg.V
    if cfg.dv is not None:
        overrides["dv"] = cfg.dv
    overrides["dv_eval"] = cfg.dv_eval
    overrides["taper"] = Taper(kind=cfg.taper_kind, frac=cfg.taper_frac)
    from dataclasses import replace

    return replace(base, **overrides)


def _write_csv(path: str, text: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _initial_condition(cfg: RunConfig) -> GridFunction:
    grid = cfg.grid()
    return GridFunction(grid, np.exp(-grid.nodes))


def cmd_simulate(cfg: RunConfig, outdir: str) -> int:
    grid = cfg.grid()
    f0 = _initial_condition(cfg)
    times = cfg.output_times or (cfg.t_end,)
    series = simulate(
        f0,
        cfg.kernel(),
        cfg.rate(),
        t_end=cfg.t_end,
        output_times=times,
        dt=cfg.dt,
        adaptive_safety=cfg.adaptive_safety,
    )
    _write_csv(os.path.join(outdir, "moments.csv"), series.moments_csv())
    for t, snap in zip(series.times, series.snapshots):
        _write_csv(os.path.join(outdir, f"snapshot_t{t:g}.csv"), snap.to_csv())
    drift = series.mass_drift()
    write_run_json(outdir, cfg, {"mass_drift": drift, "n_outputs": len(series.times)})
    print(f"simulate: {len(series.times)} snapshots, relative mass drift {drift:.3e}")
    return 0


def cmd_profile(cfg: RunConfig, outdir: str, method: str) -> int:
    grid = cfg.grid()
    results = {}
    if method in ("spectral", "both"):
        res = spectral_profile(cfg.kernel(), cfg.rate(), _spectral_cfg(cfg), grid)
        results["spectral"] = res
        _write_csv(os.path.join(outdir, "profile_spectral.csv"), res.g.to_csv())
    if method in ("dynamic", "both"):
        f0 = _initial_condition(cfg)
        t_end = cfg.t_end if cfg.t_end > 0 else 99.0
        series = simulate(f0, cfg.kernel(), cfg.rate(), t_end=t_end, output_times=(t_end,), dt=cfg.dt)
        g_dyn = rescale_snapshot(series.snapshots[-1], t_end, cfg.rate(), grid)
        from .grids import integrate
        from .spectral import ProfileResult, stationary_residual

        m1 = integrate(g_dyn, 1.0)
        g_dyn = GridFunction(grid, g_dyn.values * (cfg.rho / m1))
        res_d = ProfileResult(
            g=g_dyn,
            rho=cfg.rho,
            residual=stationary_residual(g_dyn, cfg.kernel(), cfg.rate()),
            method="dynamic",
            diagnostics={"t_end": t_end},
        )
        results["dynamic"] = res_d
        _write_csv(os.path.join(outdir, "profile_dynamic.csv"), res_d.g.to_csv())
    extra = {k: r.to_json_dict() for k, r in results.items()}
    if method == "both":
        from .grids import integrate

        diff = results["spectral"].g.values - results["dynamic"].g.values
        dist = float(np.sum(grid.weights * np.abs(diff)))
        extra["cross_method_l1"] = dist
        print(f"profile: cross-method L1 distance {dist:.4f}")
    write_run_json(outdir, cfg, extra)
    for name, r in results.items():
        print(f"profile[{name}]: residual {r.residual:.3e}")
    return 0


def cmd_estimate(cfg: RunConfig, outdir: str, profile_path: str, series_path: str | None) -> int:
    g = GridFunction.from_csv(open(profile_path, "r", encoding="utf-8").read())
    gfit = estimate_gamma_mellin(g, probe_R=cfg.probe_R, s_window=(cfg.s_window_lo, cfg.s_window_hi))
    gamma_hat = gfit.gamma_hat
    method = gfit.method
    if series_path:
        import csv

        with open(series_path, "r", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        series = TimeSeries(
            times=np.asarray([float(r["t"]) for r in rows]),
            snapshots=[],
            M0=np.asarray([float(r["M0"]) for r in rows]),
            M1=np.asarray([float(r["M1"]) for r in rows]),
            dust=np.asarray([float(r.get("dust", 0.0)) for r in rows]),
        )
        t_hi = series.times[-1]
        mfit = estimate_gamma_moments(series, t_window=(t_hi / 10.0, t_hi))
        gamma_hat = mfit.gamma_hat
        method = mfit.method
    alpha_hat = estimate_alpha(g, gamma_hat, s_window=(cfg.s_window_lo, cfg.s_window_hi), line_fit=gfit)
    K0_line = recover_K0_line(g, alpha_hat, gamma_hat, V=cfg.V_recover)
    out_grid = make_log_grid(0.02, 2.0, 400)
    k0_hat, H_hat = reconstruct_k0(K0_line, out_grid, mode=cfg.recon_mode)
    _write_csv(os.path.join(outdir, "K0_line.csv"), mellin_csv(K0_line))
    _write_csv(os.path.join(outdir, "k0_hat.csv"), k0_hat.to_csv())
    _write_csv(os.path.join(outdir, "H_hat.csv"), H_hat.to_csv())
    write_run_json(
        outdir,
        cfg,
        {
            "gamma_hat": gamma_hat,
            "alpha_hat": alpha_hat,
            "gamma_method": method,
            "K0_diagnostics": K0_line.diagnostics,
        },
    )
    print(f"estimate: gamma_hat={gamma_hat:.6g} alpha_hat={alpha_hat:.6g} ({method})")
    return 0


def mellin_csv(samples) -> str:
    return samples.to_csv()


def cmd_roundtrip(cfg: RunConfig, outdir: str) -> int:
    report = roundtrip(
        cfg.kernel(),
        cfg.rate(),
        noise=cfg.noise or None,
        seed=cfg.seed,
        V_recover=cfg.V_recover,
        mode=cfg.recon_mode,
        s_window=(cfg.s_window_lo, cfg.s_window_hi),
    )
    _write_csv(os.path.join(outdir, "k0_hat.csv"), report.k0_hat.to_csv())
    _write_csv(os.path.join(outdir, "H_hat.csv"), report.H_hat.to_csv())
    _write_csv(os.path.join(outdir, "K0_line.csv"), report.K0_line.to_csv())
    _write_csv(os.path.join(outdir, "report.json"), report.to_json() + "\n")
    write_run_json(outdir, cfg, {"report": "report.json"})
    d = report.diagnostics
    print(
        "roundtrip: gamma err {gamma_error:.4f}, alpha err {alpha_error:.4f}, "
        "kernel L2 {kernel_l2_error:.4f}".format(**d)
    )
    return 0


def cmd_mellin(args) -> int:
    g = GridFunction.from_csv(open(args.csv, "r", encoding="utf-8").read())
    samples = mellin_forward(g, u=args.u, V=args.V, dv=args.dv)
    out = args.output or "mellin.csv"
    _write_csv(out, samples.to_csv())
    print(f"mellin: wrote {out} ({samples.v_nodes.size} nodes at u={args.u:g})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fragmellin", description=__doc__)
    p.add_argument("--version", action="version", version=f"fragmellin {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    for name in ("simulate", "profile", "estimate", "roundtrip"):
        sp = sub.add_parser(name)
        sp.add_argument("config", help="path to the key = value config file")
        sp.add_argument("--output-dir", default=None)
        if name == "profile":
            sp.add_argument("--method", choices=("dynamic", "spectral", "both"), default="spectral")
        if name == "estimate":
            sp.add_argument("--profile", required=True, help="profile CSV (x,value)")
            sp.add_argument("--series", default=None, help="moments CSV (t,M0,M1,dust)")
        sp.add_argument("--emit-plot-data", action="store_true")

    sp = sub.add_parser("mellin")
    sp.add_argument("csv", help="GridFunction CSV")
    sp.add_argument("--u", type=float, required=True)
    sp.add_argument("--V", type=float, default=40.0)
    sp.add_argument("--dv", type=float, default=0.1)
    sp.add_argument("--output", default=None)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "mellin":
            return cmd_mellin(args)
        cfg = parse_config(args.config)
        if getattr(args, "emit_plot_data", False):
            cfg.emit_plot_data = True
        outdir = args.output_dir or os.path.join(cfg.output_dir, args.command)
        if args.command == "simulate":
            return cmd_simulate(cfg, outdir)
        if args.command == "profile":
            return cmd_profile(cfg, outdir, args.method)
        if args.command == "estimate":
            return cmd_estimate(cfg, outdir, args.profile, args.series)
        if args.command == "roundtrip":
            return cmd_roundtrip(cfg, outdir)
        raise ValidationError(f"unknown command {args.command}")
    except (ValueError, FileNotFoundError, ValidationError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
