"""Command-line experiment runner.

Subcommands:
    run <config>                 one simulation: trace CSV, report, optional rasters
    sweep <config>               disturbance-scale sweep with an aggregated gain report
    verify gn|gronwall|generalized-gronwall ...   standalone inequality verifiers

Exit codes: 0 success / verdict holds, 2 hypothesis-check failure when
require_mgc or require_h1 is set, 1 on faults (parse errors, solver failures).
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__, analysis, config as cfgmod, damping, disturbance, geometry, reports, solver
from .errors import ConfigError, SolverFailure

EXIT_OK = 0
EXIT_FAULT = 1
EXIT_HYPOTHESIS = 2


def _load_config(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return cfgmod.parse_config(text)


def _gate_checks(cfg, bundle, law, out):
    """require_mgc / require_h1 gates; returns (ok, items for the report)."""
    items = []
    ok = True
    law_rep = damping.verify_law(law)
    items.extend(reports.law_report_items(law_rep))
    if cfg.values["damping.require_h1"] and not law_rep.passed:
        out(f"damping-law hypothesis check FAILED: worst clause {law_rep.worst}")
        ok = False
    chk = geometry.check_mgc(
        bundle.localization.omega, bundle.mgc.gamma, bundle.mgc.eps, bundle.grid
    )
    items.append(("mgc.ok", chk.ok))
    items.append(("mgc.violations", len(chk.violations)))
    if cfg.values["geometry.require_mgc"] and not chk.ok:
        out(f"damping-region coverage check FAILED: {len(chk.violations)} nodes uncovered")
        for ix, iy, x, y in chk.violations[:10]:
            out(f"  node ({ix},{iy}) at ({x:g},{y:g})")
        if len(chk.violations) > 10:
            out(f"  ... and {len(chk.violations) - 10} more")
        ok = False
    return ok, items


def _budget_horizon(cfg):
    bh = cfg.values["disturbance.budget_horizon"]
    return cfg.values["solver.horizon"] if bh is None else bh


def _write_rasters(out_dir, bundle):
    grid = bundle.grid
    cut = bundle.cutoffs
    geometry.write_field_csv(out_dir / "raster_a.csv", grid, bundle.localization.values)
    geometry.write_field_csv(out_dir / "raster_psi.csv", grid, cut.psi)
    geometry.write_field_csv(out_dir / "raster_xi.csv", grid, cut.xi)
    geometry.write_field_csv(out_dir / "raster_beta.csv", grid, cut.beta)
    geometry.write_field_csv(
        out_dir / "raster_omega.csv", grid, bundle.localization.omega.astype(float)
    )


def _fit_window(cfg, record):
    t0 = cfg.values["analysis.fit_t0"]
    t1 = cfg.values["analysis.fit_t1"]
    if t0 is None or t1 is None:
        return None
    return (t0, t1)


def cmd_run(cfg, out_dir, out=print):
    started = time.perf_counter()
    bundle = cfgmod.build_geometry(cfg)
    law = cfgmod.build_law(cfg)
    ok, items = _gate_checks(cfg, bundle, law, out)
    if not ok:
        return EXIT_HYPOTHESIS
    spec = cfgmod.build_disturbance(cfg)
    budgets = disturbance.compute_budgets(
        spec, law, _budget_horizon(cfg), bundle.grid, cfg.values["disturbance.quad_dt"]
    )
    sim = cfgmod.build_sim(cfg, bundle, law, spec)
    record = solver.run(sim)
    reports.write_trace_csv(out_dir / "trace.csv", record)

    head = [
        ("tool", f"dampedwave {__version__}"),
        ("digest", cfg.digest),
        ("geometry.note", reports.geometry_note(cfg)),
    ]
    body = list(items)
    body.extend(reports.budget_items(budgets))
    body.append(("run.samples", record.sample_count))
    body.append(("run.final_t", float(record.times[-1])))
    body.append(("run.initial_rules", f"{cfg.values['solver.u0']} | {cfg.values['solver.u1']}"))
    body.append(("run.initial_smoothness", "closed-form smooth rules (decay theory needs H2 x H1_0 data)"))
    trace = analysis.trace_of(record, provenance=cfg.digest)
    try:
        fit = analysis.fit_decay(trace, _fit_window(cfg, record))
        body.extend(reports.fit_items(fit))
    except ConfigError as exc:
        body.append(("fit.error", str(exc)))
    windows = cfg.values["analysis.multiplier_windows"]
    if windows and record.snapshots:
        for w in windows:
            try:
                diag = analysis.multiplier_terms(
                    record, bundle.cutoffs, bundle.localization, 0.0, w
                )
                body.extend(reports.multiplier_items(diag, prefix=f"multiplier_{w:g}."))
            except ConfigError as exc:
                body.append((f"multiplier_{w:g}.error", str(exc)))
    tail = [("wall_time_s", time.perf_counter() - started)]
    reports.write_report(out_dir / "report.txt", head + body + tail)
    if cfg.values["output.rasters"]:
        _write_rasters(out_dir, bundle)
    if cfg.values["output.snapshot_rasters"]:
        for snap in record.snapshots:
            geometry.write_field_csv(
                out_dir / f"snapshot_u_{snap.sample_index:05d}.csv", bundle.grid, snap.u
            )
            geometry.write_field_csv(
                out_dir / f"snapshot_v_{snap.sample_index:05d}.csv", bundle.grid, snap.v
            )
    out(f"run complete: {record.sample_count} samples -> {out_dir / 'trace.csv'}")
    return EXIT_OK


def _sweep_one(args):
    cfg_values_digest, scale = args
    cfg = cfg_values_digest
    bundle = cfgmod.build_geometry(cfg)
    law = cfgmod.build_law(cfg)
    spec = cfgmod.build_disturbance(cfg)
    sim = cfgmod.build_sim(cfg, bundle, law, spec, scale=scale)
    record = solver.run(sim)
    budgets = disturbance.compute_budgets(
        spec.scaled(scale), law, _budget_horizon(cfg), bundle.grid,
        cfg.values["disturbance.quad_dt"],
    )
    return record, budgets


def cmd_sweep(cfg, out_dir, workers=1, out=print):
    started = time.perf_counter()
    scales = list(cfg.values["disturbance.scales"])
    if 0.0 not in scales:
        raise ConfigError("sweep scales must include 0")
    bundle = cfgmod.build_geometry(cfg)
    law = cfgmod.build_law(cfg)
    ok, items = _gate_checks(cfg, bundle, law, out)
    if not ok:
        return EXIT_HYPOTHESIS

    jobs = [(cfg, s) for s in scales]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(j) for j in jobs]

    traces = []
    budgets = []
    for scale, (record, bud) in zip(scales, results):
        reports.write_trace_csv(out_dir / f"trace_s{scale:g}.csv", record)
        traces.append(analysis.trace_of(record, provenance=cfg.digest))
        budgets.append(bud)
    iss = analysis.iss_report(scales, traces, budgets, fit_window=_fit_window(cfg, None))
    head = [
        ("tool", f"dampedwave {__version__}"),
        ("digest", cfg.digest),
        ("geometry.note", reports.geometry_note(cfg)),
    ]
    body = list(items) + reports.iss_items(iss)
    tail = [("wall_time_s", time.perf_counter() - started)]
    reports.write_report(out_dir / "report.txt", head + body + tail)
    out("scale  Einf")
    for s, e in zip(iss.scales, iss.E_inf):
        out(f"{s:<6g} {e:.6g}")
    out(
        f"decays_exponentially={iss.decays_exponentially} "
        f"remains_bounded={iss.remains_bounded} gain_monotone={iss.gain_monotone}"
    )
    return EXIT_OK


def cmd_verify(args, out=print):
    subject = args.subject
    if subject == "gn":
        theta = analysis.gn_theta(args.N, args.m, args.q, args.r, args.p)
        out(f"theta = {theta:g}")
        return EXIT_OK
    if subject == "gronwall":
        data = reports.read_trace_csv(args.trace)
        trace = analysis.EnergyTrace(times=data["t"], E=data["E"])
        rep = analysis.gronwall_check(trace, args.T, args.C0, tail_bound=args.tail_bound)
        out(f"verdict = {rep.verdict}")
        out(f"worst_hypothesis_margin = {rep.worst_hypothesis_margin:.6g}")
        if not math.isnan(rep.worst_conclusion_margin):
            out(f"worst_conclusion_margin = {rep.worst_conclusion_margin:.6g}")
        return EXIT_OK if rep.verdict == "holds" else EXIT_FAULT
    # generalized-gronwall
    if args.trace is not None:
        data = reports.read_trace_csv(args.trace)
        for col in ("F", "h1", "h2"):
            if col not in data:
                raise ConfigError(f"trace CSV must carry column {col}")
        rep = analysis.generalized_gronwall_bound(
            data["t"], data["F"], data["h1"], data["h2"],
            args.C1, args.C2, args.C3, args.alpha1, args.alpha2,
        )
        out(f"hypothesis_ok = {rep.hypothesis_ok}")
        out(f"sup_F = {rep.sup_F:.6g}  bound = {rep.bound:.6g}")
        out(f"holds = {rep.holds}")
        return EXIT_OK if rep.holds else EXIT_FAULT
    passes, total = analysis.self_test_generalized_gronwall(args.self_test, args.seed)
    out(f"{passes}/{total} bound holds")
    return EXIT_OK if passes == total else EXIT_FAULT


def _build_parser():
    ap = argparse.ArgumentParser(
        prog="dampedwave",
        description="Simulate and verify the localized damped wave equation at desk scale",
    )
    ap.add_argument("--version", action="version", version=f"dampedwave {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one simulation from a config file")
    run_p.add_argument("config")
    run_p.add_argument("--out", default=None, help="output directory (default from config)")

    sweep_p = sub.add_parser("sweep", help="run the disturbance-scale sweep")
    sweep_p.add_argument("config")
    sweep_p.add_argument("--out", default=None)
    sweep_p.add_argument("--workers", type=int, default=1)

    ver_p = sub.add_parser("verify", help="standalone inequality verifiers")
    ver_sub = ver_p.add_subparsers(dest="subject", required=True)

    gn = ver_sub.add_parser("gn", help="interpolation exponent")
    gn.add_argument("--N", type=float, required=True)
    gn.add_argument("--m", type=float, required=True)
    gn.add_argument("--q", type=float, required=True)
    gn.add_argument("--r", type=float, required=True)
    gn.add_argument("--p", type=float, required=True)

    gw = ver_sub.add_parser("gronwall", help="integral decay lemma on a trace CSV")
    gw.add_argument("trace")
    gw.add_argument("--T", type=float, required=True)
    gw.add_argument("--C0", type=float, default=0.0)
    gw.add_argument("--tail-bound", dest="tail_bound", type=float, default=None)

    gg = ver_sub.add_parser("generalized-gronwall", help="two-kernel bound")
    gg.add_argument("trace", nargs="?", default=None, help="CSV with t,F,h1,h2 columns")
    gg.add_argument("--C1", type=float, default=1.0)
    gg.add_argument("--C2", type=float, default=1.0)
    gg.add_argument("--C3", type=float, default=0.0)
    gg.add_argument("--alpha1", type=float, default=0.5)
    gg.add_argument("--alpha2", type=float, default=0.5)
    gg.add_argument("--self-test", dest="self_test", type=int, default=100)
    gg.add_argument("--seed", type=int, default=0)
    return ap


def main(argv=None, out=print):
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            return cmd_verify(args, out=out)
        cfg = _load_config(args.config)
        out_dir = Path(args.out if args.out else cfg.values["output.dir"])
        out_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "run":
            return cmd_run(cfg, out_dir, out=out)
        return cmd_sweep(cfg, out_dir, workers=args.workers, out=out)
    except (ConfigError, SolverFailure) as exc:
        out(f"error: {exc}")
        return EXIT_FAULT


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
