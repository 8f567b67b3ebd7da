"""``floquet-rd`` command line: analyze, sweep, simulate, verify."""

from __future__ import annotations

import argparse
import csv
import itertools
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .asymptotics import (
    analyze_snapshots, measure_decay, predicted_alpha_star, write_asymptotics_csv,
)
from .config import (
    RunConfig, floquet_kwargs, grid_from_config, load_config, model_from_config, orbit_kwargs,
    perturbation_from_config, sim_from_config,
)
from .errors import BlowUp, ConfigError, EmptyWindow, FloquetRDError, OutOfTube
from .floquet import Verdict, analyze, export_sweep_csv
from .orbit import find_orbit
from .simulate import init_state, linearized_run, run, write_snapshot

EXIT_ERROR = 1
EXIT_BLOWUP = 20
ATLAS_HEADER = ["verdict", "d0", "max_re", "k_star"]


def _say(msg=""):
    print(msg, flush=True)


def _k_grid(fk):
    if fk["k_max"] is None:
        return None
    uni = np.linspace(0.0, fk["k_max"], fk["n_points"])
    fine = np.geomspace(1e-3, 0.1, fk["n_refine"]) if fk["n_refine"] else np.empty(0)
    return np.unique(np.concatenate([uni, fine]))


def _analysis(cfg: RunConfig, threads=1, overrides=None):
    model, D = model_from_config(cfg, overrides)
    orbit = find_orbit(model, **orbit_kwargs(cfg, model))
    fk = floquet_kwargs(cfg)
    res = analyze(model, orbit, D, k_grid=_k_grid(fk), tol_re=fk["tol_re"], tol_d0=fk["tol_d0"],
                  k_max_fit=fk["k_fit"], threads=threads, n_points=fk["n_points"],
                  n_refine=fk["n_refine"])
    return model, D, orbit, res


def cmd_analyze(cfg: RunConfig, out, threads=1):
    cfg.require("analyze")
    _, _, _, res = _analysis(cfg, threads)
    export_sweep_csv(res.sweep, os.path.join(out, "spectrum.csv"))
    text = res.report.to_text()
    with open(os.path.join(out, "report.txt"), "w") as fh:
        fh.write(text)
    _say(text.rstrip())
    return res.report.exit_code


def _axis_values(ax):
    return list(np.linspace(ax["start"], ax["stop"], ax["num"])) if ax["num"] else []


def _override(cfg, params):
    over = {}
    D = [list(r) for r in cfg.block("model").get("D", [[1.0, 0.0], [0.0, 1.0]])]
    touched = False
    for name, val in params.items():
        if name.startswith("D"):
            D[int(name[1]) - 1][int(name[2]) - 1] = float(val)
            touched = True
        else:
            over[name] = float(val)
    if touched:
        over["D"] = D
    return over


def _cell(cfg, params):
    try:
        _, _, _, res = _analysis(cfg, 1, _override(cfg, params))
        r = res.report
        return [r.verdict.value, r.d0, r.max_re, r.k_star]
    except (FloquetRDError, ValueError) as exc:
        _say(f"cell {params}: {type(exc).__name__}: {exc}")
        return ["Error", math.nan, math.nan, None]


def cmd_sweep(cfg: RunConfig, out, threads=1):
    cfg.require("sweep")
    axes = cfg.block("sweep").get("axis", [])
    if not axes:
        raise ConfigError("[sweep] needs at least one [[sweep.axis]]")
    names = [a["param"] for a in axes]
    if len(set(names)) != len(names):
        raise ConfigError("sweep axes must be distinct")
    if "D11" in names or "D12" in names or "D21" in names or "D22" in names:
        if cfg.block("model").get("type") != "example":
            raise ConfigError("D-entry axes need a 2x2 diffusion matrix")
    cells = [dict(zip(names, combo)) for combo in itertools.product(*map(_axis_values, axes))]
    if threads > 1 and cells:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda p: _cell(cfg, p), cells))
    else:
        rows = [_cell(cfg, p) for p in cells]
    path = os.path.join(out, "atlas.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names + ATLAS_HEADER)
        for p, row in zip(cells, rows):
            verdict, d0, max_re, k_star = row
            w.writerow([repr(float(p[n])) for n in names]
                       + [verdict, repr(float(d0)), repr(float(max_re)),
                          "" if k_star is None else repr(float(k_star))])
    counts = {}
    for row in rows:
        counts[row[0]] = counts.get(row[0], 0) + 1
    _say(f"{len(rows)} cells written to {path}: "
         + ", ".join(f"{k}={v}" for k, v in sorted(counts.items())))
    return 0


def cmd_simulate(cfg: RunConfig, out, threads=1):
    cfg.require("simulate")
    model, D, orbit, res = _analysis(cfg, threads)
    rep = res.report
    grid = grid_from_config(cfg)
    sim = sim_from_config(cfg)
    pert = perturbation_from_config(cfg, grid, model.dimension)
    sb = cfg.block("sim")
    t0 = float(sb.get("t0", 0.0))
    linear = bool(sb.get("linear", False))
    _say(f"verdict {rep.verdict.value}, d0 = {rep.d0:.6g}")
    state = init_state(orbit, t0, pert, grid, model, linear=linear)
    stable = rep.verdict == Verdict.STABLE
    code = 0
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            runner = linearized_run if linear else run
            result = runner(state, sim, D, orbit, res.adjoint, stable=stable)
        except BlowUp as exc:
            _say(str(exc))
            result = exc.result
            code = EXIT_BLOWUP
    for w in caught:
        _say(f"warning: {w.message}")
    result.write_csv(os.path.join(out, "norms.csv"))
    for t, snap in sorted(result.snapshots.items()):
        write_snapshot(os.path.join(out, f"snapshot_t{t:g}.rdsnap"), snap.values, grid, snap.t)
    window = tuple(sb.get("fit_window", (50.0, 400.0)))
    try:
        fit = measure_decay(result.times, result.linf, window)
        _say(f"linf decay exponent p = {fit.exponent:.4f} on [{window[0]:g}, {window[1]:g}]")
    except EmptyWindow as exc:
        _say(f"no decay fit: {exc}")
    if result.snapshots and rep.d0 > 0:
        a_star, band = predicted_alpha_star(pert, orbit, res.adjoint, t0, grid)
        try:
            rows, comps = analyze_snapshots(result.snapshots, orbit, res.adjoint, a_star, rep.d0)
        except OutOfTube as exc:
            _say(f"no phase analysis: {exc}")
        else:
            write_asymptotics_csv(rows, os.path.join(out, "asymptotics.csv"))
            for c in comps:
                if c is not None:
                    c.write_csv(os.path.join(out, f"profile_t{c.t:g}.csv"))
            _say(f"predicted alpha_* = {a_star:.6g} +- {band:.2g}, "
                 f"late phase mass = {rows[-1].alpha_mass:.6g}")
    return code


def cmd_verify(cfg, out, threads=1, seed=42, filter_=None):
    from .verify import run_suite

    vb = cfg.block("verify") if cfg is not None else {}
    results = run_suite(filter_, slow=vb.get("slow", False), tolerances=vb.get("tolerances"),
                        seed=seed, echo=_say)
    failed = [r for r in results if not r.passed]
    total = sum(r.elapsed for r in results)
    _say(f"{len(results) - len(failed)}/{len(results)} checks passed in {total:.1f}s")
    if out:
        with open(os.path.join(out, "verify.txt"), "w") as fh:
            fh.write("\n".join(r.line() for r in results) + "\n")
    return 0 if results and not failed else EXIT_ERROR


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML configuration file")
    common.add_argument("--out", default=".", help="output directory (default: .)")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--filter", default=None, help="comma-separated check names or modules")
    p = argparse.ArgumentParser(prog="floquet-rd", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in [("analyze", "Floquet spectrum and stability verdict"),
                           ("sweep", "stability atlas over one or two parameters"),
                           ("simulate", "pseudospectral run with decay/profile diagnostics"),
                           ("verify", "run the acceptance checks")]:
        sub.add_parser(name, parents=[common], help=helptext)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_ERROR
    try:
        cfg = None
        if args.config:
            cfg = load_config(args.config)
        elif args.command != "verify":
            raise ConfigError(f"'{args.command}' needs --config")
        os.makedirs(args.out, exist_ok=True)
        if args.command == "verify":
            return cmd_verify(cfg, args.out, args.threads, args.seed, args.filter)
        fn = {"analyze": cmd_analyze, "sweep": cmd_sweep, "simulate": cmd_simulate}[args.command]
        return fn(cfg, args.out, args.threads)
    except (FloquetRDError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
