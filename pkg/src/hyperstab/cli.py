"""Command-line interface: one subcommand per experiment family.

Exit codes: 0 success, 1 experiment/acceptance failure, 2 config error,
3 input error, 4 dynamics error, 5 numeric error, 6 budget error.
CSV artifacts are deterministic for a fixed config and seed.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import acceptance, delay, hypersolver, spectral
from .errors import (BudgetError, ConfigError, DynamicsError, HyperstabError,
                     InputError, NumericError)
from .signals import SampledSignal

_EXIT_CODES = [(ConfigError, 2), (InputError, 3), (DynamicsError, 4),
               (NumericError, 5), (BudgetError, 6), (HyperstabError, 1)]


def _parse_p(text):
    if text in ("inf", "infty", "oo"):
        return math.inf
    return float(text)


def cmd_rho(args):
    m = spectral.read_matrix(args.matrix)
    opts = spectral.RhoOptions(seed=args.seed, fatol=args.tol)
    if args.p == "zero":
        res = spectral.rho_hat_zero(m, grid_per_axis=args.grid, opts=opts)
        witness = res.witness
    else:
        res = spectral.rho_hat_p(m, _parse_p(args.p), opts)
        witness = res.witness
    record = {"value": res.value,
              "witness": [float(w) for w in witness],
              "iterations": res.iterations}
    if res.boundary:
        record["boundary"] = True
    print(json.dumps(record))
    return 0


def _load_history(path, sys_):
    if path:
        return SampledSignal.from_csv(path)
    rmax = float(np.max(sys_.r))
    n = 65
    return SampledSignal(-rmax, rmax / (n - 1), np.ones((n, sys_.n)))


def cmd_delay_sim(args):
    sys_ = delay.DelaySystem.from_file(args.system)
    hist = _load_history(args.history, sys_)
    sig = delay.simulate_linear(sys_, hist, args.T, dt=args.dt)
    if args.out:
        sig.to_csv(args.out)
    final = sig.values[-1]
    print(json.dumps({"T": args.T, "dt": sig.dt,
                      "final": [float(v) for v in final],
                      "sup": float(np.max(np.abs(sig.values))),
                      "out": args.out}))
    return 0


def _parse_rect(text):
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise InputError("rect must be re_min,re_max,im_max")
    return tuple(parts)


def cmd_delay_roots(args):
    sys_ = delay.DelaySystem.from_file(args.system)
    rect = _parse_rect(args.rect) if args.rect else None
    rep = delay.rightmost_roots(sys_, rect=rect)
    print(json.dumps({
        "roots": [[z.real, z.imag] for z in rep.roots],
        "winding": rep.winding_total,
        "residual": rep.residual,
        "complete": rep.complete,
        "rightmost": rep.rightmost if rep.roots else None}))
    return 0


def cmd_delay_sweep(args):
    sys_ = delay.DelaySystem.from_file(args.system)
    rect = _parse_rect(args.rect) if args.rect else None
    rep = delay.robustness_sweep(sys_, args.eps, samples=args.samples,
                                 seed=args.seed, rect=rect)
    print(json.dumps({
        "worst_real_part": rep.worst_real_part,
        "worst_delays": [float(r) for r in rep.worst_delays],
        "rho0": rep.rho0_value,
        "verdict": rep.rho0_verdict,
        "all_scans_complete": rep.all_complete}))
    return 0


def _load_hyperbolic_system(path):
    n = None
    speeds = None
    rows = []
    preset = None
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            tok = line.split()
            if tok[0] == "n":
                n = int(tok[1])
            elif tok[0] == "speeds":
                speeds = [float(t) for t in tok[1:]]
            elif tok[0] == "preset":
                preset = tok[1]
            else:
                rows.extend(float(t) for t in tok)
    if preset == "counterexample":
        from .counterexample import build_config, counterexample_system
        return counterexample_system(build_config(validate_rho2=False))
    if n is None or speeds is None:
        raise InputError(f"{path}: needs 'n' and 'speeds' (or a preset)")
    if len(rows) != n * n:
        raise InputError(f"{path}: expected {n * n} gain entries")
    return hypersolver.HyperbolicSystem.linear(speeds,
                                               np.array(rows).reshape(n, n))


def _load_u0(source, cells, n):
    if source.startswith("bump:"):
        params = dict(kv.split("=") for kv in source[5:].split(","))
        c = float(params.get("center", 0.5))
        w = float(params.get("width", 0.2))
        amp = float(params.get("amp", 0.01))
        comp = int(params.get("component", 1)) - 1

        def fun(x):
            u = np.zeros((n, x.size))
            mask = np.abs(x - c) < w
            u[comp, mask] = amp * np.cos(np.pi * (x[mask] - c) / (2 * w)) ** 2
            return u
        return hypersolver.GridState.from_function(fun, cells, n)
    data = np.loadtxt(source, delimiter=",", skiprows=1, ndmin=2)
    x = np.linspace(0.0, 1.0, cells + 1)
    u = np.vstack([np.interp(x, data[:, 0], data[:, 1 + j]) for j in range(n)])
    return hypersolver.GridState(x, u)


def cmd_pde_sim(args):
    sys_ = _load_hyperbolic_system(args.system)
    state = _load_u0(args.u0, args.cells, sys_.n)
    norms = tuple(args.norms.split(",")) if args.norms else ("c0", "c1")
    traj = hypersolver.solve_forward(sys_, state, args.T, scheme=args.scheme,
                                     norms=norms)
    outdir = Path(args.out or ".")
    outdir.mkdir(parents=True, exist_ok=True)
    traj.norms_to_csv(outdir / "norms.csv")
    traj.snapshots[-1].to_csv(outdir / "final_state.csv")
    traj.trace.to_csv(outdir / "trace.csv")
    summary = {"scheme": args.scheme, "cells": args.cells, "T": args.T,
               "final_norms": {k: float(v[-1])
                               for k, v in traj.norm_series.items()}}
    if args.svg:
        from . import plots
        plots.svg_norm_series(traj.times, traj.norm_series,
                              outdir / "norms.svg")
    print(json.dumps(summary))
    return 0


def cmd_counterexample(args):
    from . import counterexample as ce
    eps = 1e-3 if args.eps == "auto" else float(args.eps)
    cfg = ce.build_config(T=args.T, eps_request=eps, m=args.m)
    art = ce.run_certificate(cfg, cells=args.cells)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    ce.tree_to_csv(art.tree, outdir / "tree.csv")
    times = np.linspace(0.0, float(cfg.r1), 4001)
    tr = SampledSignal(0.0, float(cfg.r1) / 4000, art.trace.eval(times),
                       art.trace.eval_derivative(times))
    tr.to_csv(outdir / "trace.csv")
    art.u0_state.to_csv(outdir / "u0.csv")
    cert = art.certificate
    (outdir / "certificate.txt").write_text(cert.to_text(), encoding="utf-8")
    if args.svg:
        from . import plots
        plots.svg_characteristic_diagram(art.tree, outdir / "characteristics.svg")
        plots.svg_trace(tr, outdir / "trace.svg", title="synthesized trace")
        sys2 = ce.counterexample_system(cfg)
        traj = hypersolver.solve_forward(sys2, art.u0_state, cfg.T_float,
                                         scheme="characteristics",
                                         norms=("c0", "c1"), snapshots=200)
        traj.norms_to_csv(outdir / "norms.csv")
        plots.svg_norm_series(traj.times, traj.norm_series,
                              outdir / "norm_growth.svg",
                              title="C^m norms along the certificate run")
    print(json.dumps({"T": cert.T, "eps": cert.eps,
                      "amplification": cert.amplification,
                      "floor": cert.theoreticalFloor,
                      "derivAtT": cert.derivAtT,
                      "mismatch": cert.mismatch,
                      "passed": cert.passed,
                      "out": str(outdir)}))
    return 0 if cert.passed else 1


_EXPERIMENT_KINDS = {}


def _experiment(kind):
    def deco(fn):
        _EXPERIMENT_KINDS[kind] = fn
        return fn
    return deco


@_experiment("rho")
def _exp_rho(params, outdir):
    m = np.array(params["matrix"], dtype=float)
    p = params.get("p", 2)
    p = _parse_p(str(p))
    res = spectral.rho_hat_p(m, p, spectral.RhoOptions(
        seed=int(params.get("seed", 0))))
    return {"value": res.value, "witness": [float(w) for w in res.witness]}


@_experiment("rho-zero")
def _exp_rho_zero(params, outdir):
    m = np.array(params["matrix"], dtype=float)
    res = spectral.rho_hat_zero(m, grid_per_axis=int(params.get("grid", 64)))
    return {"value": res.value}


@_experiment("margin")
def _exp_margin(params, outdir):
    m = np.array(params["matrix"], dtype=float)
    rep = spectral.margin_report(m)
    return {"spectral_radius": rep.spectral_radius,
            "rho0_lower": rep.rho0_lower,
            "rhoP": {str(p): r.value for p, r in rep.rhoP.items()},
            "flags": rep.flags}


@_experiment("counterexample")
def _exp_counterexample(params, outdir):
    from . import counterexample as ce
    cfg = ce.build_config(T=float(params.get("T", 9.0)),
                          eps_request=float(params.get("eps", 1e-3)),
                          m=int(params.get("m", 1)))
    art = ce.run_certificate(cfg, cells=int(params.get("cells", 800)))
    cert = art.certificate
    if outdir is not None:
        (outdir / "certificate.txt").write_text(cert.to_text(),
                                                encoding="utf-8")
    return {"T": cert.T, "amplification": cert.amplification,
            "floor": cert.theoreticalFloor, "mismatch": cert.mismatch,
            "passed": cert.passed}


def _run_experiment(exp, base_out):
    kind = exp.get("kind")
    outdir = None
    if base_out is not None:
        outdir = base_out / exp["id"]
        outdir.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    try:
        if kind not in _EXPERIMENT_KINDS:
            raise ConfigError(f"unknown experiment kind {kind!r}")
        payload = _EXPERIMENT_KINDS[kind](exp.get("params", {}), outdir)
        status = "pass" if payload.get("passed", True) else "fail"
    except HyperstabError as exc:
        payload = {"error": str(exc)}
        status = "error"
    return {"id": exp["id"], "kind": kind, "status": status,
            "wall_clock": time.time() - t0, "result": payload,
            "config": exp}


def cmd_sweep(args):
    with open(args.config, "r", encoding="utf-8") as fh:
        config = json.load(fh)
    experiments = config.get("experiments", [])
    ids = [e.get("id") for e in experiments]
    if len(set(ids)) != len(ids):
        raise ConfigError("duplicate experiment ids in sweep config")
    base_out = Path(config["out"]) if config.get("out") else None
    if base_out is not None:
        base_out.mkdir(parents=True, exist_ok=True)
        seen = set()
        for e in experiments:
            d = str(base_out / e["id"])
            if d in seen:
                raise ConfigError(f"duplicate output dir {d}")
            seen.add(d)
    threads = int(os.environ.get("HYPERSTAB_THREADS", "1"))
    if threads > 1 and len(experiments) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda e: _run_experiment(e, base_out),
                                 experiments))
    else:
        rows = [_run_experiment(e, base_out) for e in experiments]
    summary = {"experiments": rows,
               "passed": all(r["status"] == "pass" for r in rows)}
    text = json.dumps(summary, indent=2, sort_keys=True)
    if base_out is not None:
        (base_out / "summary.json").write_text(text, encoding="utf-8")
    print(text)
    return 0 if summary["passed"] else 1


def cmd_accept(args):
    ids = [int(t) for t in args.ids.split(",")] if args.ids else None
    results, ok = acceptance.run(ids=ids)
    if args.out:
        payload = [{"criterion": r.cid, "name": r.name, "passed": r.passed,
                    "elapsed": r.elapsed, "failures": r.failures}
                   for r in results]
        Path(args.out).write_text(json.dumps(payload, indent=2),
                                  encoding="utf-8")
    return 0 if ok else 1


def build_parser():
    ap = argparse.ArgumentParser(
        prog="hyperstab",
        description="Stability indices and boundary-feedback experiments for "
                    "1-D hyperbolic systems.",
        epilog="Exit codes: 0 ok, 1 experiment failure, 2 config error, "
               "3 input error, 4 dynamics error, 5 numeric error, "
               "6 budget error.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rho", help="scaled stability indices of a gain matrix")
    p.add_argument("--matrix", required=True)
    p.add_argument("--p", default="2", help="1 | 2 | inf | zero | <float>")
    p.add_argument("--tol", type=float, default=1e-13)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", type=int, default=64)
    p.set_defaults(func=cmd_rho)

    p = sub.add_parser("delay-sim", help="simulate a linear delay recursion")
    p.add_argument("--system", required=True)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--history", default=None, help="CSV signal on [-max r, 0]")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_delay_sim)

    p = sub.add_parser("delay-roots", help="characteristic roots in a rectangle")
    p.add_argument("--system", required=True)
    p.add_argument("--rect", default=None, help="re_min,re_max,im_max")
    p.set_defaults(func=cmd_delay_roots)

    p = sub.add_parser("delay-sweep", help="robustness sweep over delays")
    p.add_argument("--system", required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--samples", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rect", default=None)
    p.set_defaults(func=cmd_delay_sweep)

    p = sub.add_parser("pde-sim", help="integrate a hyperbolic system")
    p.add_argument("--system", required=True)
    p.add_argument("--u0", required=True, help="CSV file or bump:center=..,width=..,amp=..")
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--cells", type=int, default=400)
    p.add_argument("--scheme", choices=("upwind", "characteristics"),
                   default="characteristics")
    p.add_argument("--norms", default="c0,c1")
    p.add_argument("--out", default=None)
    p.add_argument("--svg", action="store_true")
    p.set_defaults(func=cmd_pde_sim)

    p = sub.add_parser("counterexample", help="run the growth certificate")
    p.add_argument("--T", type=float, default=9.0)
    p.add_argument("--eps", default="auto")
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--cells", type=int, default=800)
    p.add_argument("--out", required=True)
    p.add_argument("--svg", action="store_true")
    p.set_defaults(func=cmd_counterexample)

    p = sub.add_parser("sweep", help="run a batch of experiments from JSON")
    p.add_argument("config")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("accept", help="run the acceptance suite")
    p.add_argument("--ids", default=None, help="comma-separated criteria ids")
    p.add_argument("--out", default=None, help="write JSON results here")
    p.set_defaults(func=cmd_accept)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except HyperstabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for klass, code in _EXIT_CODES:
            if isinstance(exc, klass):
                return code
        return 1


if __name__ == "__main__":
    sys.exit(main())
