"""Command-line front end: parse a potential spec, dispatch to the analysis
modules, and emit deterministic JSON reports plus CSV side files.

Commands:
    tc        crossover-time classification report
    bad-scan  scan a window of conditioning values for bad magnetisations
    kernel    first-spin conditional kernel (initial at t = 0, evolved at t > 0)
    eta       two-layer kernel of the time-0 magnetisation
    traj      minimising magnetisation trajectories
    simulate  Monte Carlo conditional sampling plus KS against quadrature
    limitpot  the limiting evolved potential (inf-convolution)
    oracle    brute-force agreement check of the tilt/curvature equivalence

Exit status: 0 success, 1 IO or parse failure, 2 domain error. Reports embed
the potential spec, parameters, tolerances, seed, and tool version; rerunning
a deterministic command from its embedded config reproduces the numbers.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from gibbsdyn import __version__, classify, kernels, mc_sim, paths, potential, tilted
from gibbsdyn.errors import GibbsDynError

log = logging.getLogger("gibbsdyn")

FORMAT_CHOICES = ("csv", "json", "both")


def _configure_logging():
    level = os.environ.get("GIBBS_DYN_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and math.isinf(obj):
        return "inf"
    raise TypeError(f"not JSON serialisable: {type(obj)}")


def _sanitise(value):
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if isinstance(value, dict):
        return {k: _sanitise(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_sanitise(v) for v in value]
    return value


def _write_report(outdir: Path, name: str, report: dict, fmt: str):
    if fmt == "csv":
        return None
    path = outdir / f"{name}.json"
    path.write_text(
        json.dumps(_sanitise(report), indent=2, sort_keys=True, default=_json_default) + "\n",
        encoding="utf-8",
    )
    log.debug("wrote %s", path)
    return path


def _write_csv(outdir: Path, name: str, header, rows, fmt: str):
    if fmt == "json":
        return None
    path = outdir / f"{name}.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    log.debug("wrote %s", path)
    return path


def _tolerances(args):
    """ToleranceConfig and QuadratureConfig from the override flags."""
    tol = tilted.ToleranceConfig(
        eps_val_rel=args.eps_val_rel, delta_cluster=args.delta_cluster
    )
    quad = kernels.QuadratureConfig(
        truncation_mass=args.truncation_mass, grid_n=args.quad_grid
    )
    return tol, quad


def _envelope(args, spec, params: dict) -> dict:
    return {
        "tool": {"name": "gibbs-dyn", "version": __version__},
        "command": args.command,
        "potential": spec.to_json_dict(),
        "params": params,
        "tolerances": {
            "eps_val_rel": args.eps_val_rel,
            "delta_cluster": args.delta_cluster,
            "truncation_mass": args.truncation_mass,
            "grid_n": args.quad_grid,
        },
    }


def _parse_window(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError(f"window must be 'a,b', got {text!r}")
    return float(parts[0]), float(parts[1])


def _cmd_tc(args, spec, outdir):
    tol, _ = _tolerances(args)
    report = classify.crossover_time(spec, tol)
    doc = _envelope(args, spec, {})
    doc["results"] = report.to_json_dict()
    _write_report(outdir, "tc", doc, args.format)
    print(json.dumps(_sanitise(report.to_json_dict()), sort_keys=True))
    return 0


def _cmd_bad_scan(args, spec, outdir):
    window = _parse_window(args.window)
    tol, _ = _tolerances(args)
    result = tilted.bad_set_scan(spec, args.t, window, args.grid, tol=tol, threads=args.threads)
    doc = _envelope(args, spec, {"t": args.t, "window": list(window), "grid": args.grid})
    doc["results"] = {
        "intervals": [list(iv) for iv in result.intervals],
        "n_bad_intervals": len(result.intervals),
    }
    _write_report(outdir, "bad_scan", doc, args.format)
    _write_csv(
        outdir,
        "bad_scan",
        ["alpha", "n_minimisers", "q_min", "q_max", "value"],
        [(r.alpha, r.n_minimisers, r.q_min, r.q_max, r.value) for r in result.rows],
        args.format,
    )
    print(f"bad intervals: {[list(iv) for iv in result.intervals]}")
    return 0


def _kernel_csv_rows(k: kernels.KernelEstimate):
    return zip(k.grid.tolist(), k.density.tolist())


def _cmd_kernel(args, spec, outdir):
    tol, quad = _tolerances(args)
    if args.t == 0.0:
        k = kernels.initial_kernel(spec, args.n, args.alpha, quad)
        kind = "initial"
    else:
        k = kernels.evolved_kernel(spec, args.n, args.t, args.alpha, quad, tol)
        kind = "evolved"
    doc = _envelope(args, spec, {"n": args.n, "t": args.t, "alpha": args.alpha})
    doc["results"] = {"kind": kind, **k.moment_summary()}
    _write_report(outdir, "kernel", doc, args.format)
    _write_csv(outdir, "kernel", ["x", "density"], _kernel_csv_rows(k), args.format)
    print(json.dumps(_sanitise(doc["results"]), sort_keys=True))
    return 0


def _cmd_eta(args, spec, outdir):
    tol, quad = _tolerances(args)
    k = kernels.eta_kernel(spec, args.n, args.t, args.alpha, quad, tol)
    doc = _envelope(args, spec, {"n": args.n, "t": args.t, "alpha": args.alpha})
    doc["results"] = k.moment_summary()
    _write_report(outdir, "eta", doc, args.format)
    _write_csv(outdir, "eta", ["x", "density"], _kernel_csv_rows(k), args.format)
    print(json.dumps(_sanitise(doc["results"]), sort_keys=True))
    return 0


def _cmd_traj(args, spec, outdir):
    tol, _ = _tolerances(args)
    trajectories = paths.minimising_trajectories(spec, args.t, args.alpha, grid_n=args.grid, tol=tol)
    rates = [paths.path_rate(spec, args.t, args.alpha, p) for p in trajectories]
    doc = _envelope(args, spec, {"t": args.t, "alpha": args.alpha, "grid": args.grid})
    doc["results"] = {
        "n_trajectories": len(trajectories),
        "starting_points": [p.start for p in trajectories],
        "rates": rates,
    }
    _write_report(outdir, "traj", doc, args.format)
    for i, p in enumerate(trajectories):
        _write_csv(outdir, f"traj_{i}", ["s", "phi"], paths.path_to_csv_rows(p), args.format)
    print(json.dumps(_sanitise(doc["results"]), sort_keys=True))
    return 0


def _cmd_simulate(args, spec, outdir):
    config = mc_sim.SimConfig(
        n=args.n,
        t=args.t,
        alpha_target=args.alpha,
        replicas=args.replicas,
        seed=args.seed,
        bin_halfwidth=args.binwidth,
        method=args.method,
    )
    tol, quad = _tolerances(args)
    emp = mc_sim.evolve_and_condition(config, spec)
    reference = kernels.evolved_kernel(spec, args.n, args.t, args.alpha, quad, tol)
    emp = mc_sim.attach_ks(emp, reference)
    doc = _envelope(
        args,
        spec,
        {
            "n": args.n,
            "t": args.t,
            "alpha": args.alpha,
            "replicas": args.replicas,
            "seed": args.seed,
            "binwidth": args.binwidth,
            "method": emp.method,
        },
    )
    doc["results"] = {
        "accepted": emp.accepted_count,
        "acceptance_rate": emp.acceptance_rate,
        "sample_mean": emp.mean(),
        "sample_variance": emp.variance(),
        "ks_vs_quadrature": emp.ks_vs,
    }
    _write_report(outdir, "simulate", doc, args.format)
    _write_csv(outdir, "samples", ["x1"], ((float(x),) for x in emp.samples), args.format)
    print(json.dumps(_sanitise(doc["results"]), sort_keys=True))
    return 0


def _cmd_limitpot(args, spec, outdir):
    window = _parse_window(args.window)
    tol, _ = _tolerances(args)
    rs = np.linspace(window[0], window[1], args.grid)
    vt = tilted.limiting_potential(spec, args.t, rs, tol)
    doc = _envelope(args, spec, {"t": args.t, "window": list(window), "grid": args.grid})
    doc["results"] = {"r_min": float(rs[0]), "r_max": float(rs[-1]), "vt_min": float(np.min(vt))}
    _write_report(outdir, "limitpot", doc, args.format)
    _write_csv(outdir, "limitpot", ["r", "v_t"], zip(rs.tolist(), np.asarray(vt).tolist()), args.format)
    print(json.dumps(_sanitise(doc["results"]), sort_keys=True))
    return 0


def _cmd_oracle(args, spec, outdir):
    window = _parse_window(args.window)
    agree = classify.equivalence_oracle(lambda x: potential.eval(spec, x), args.beta, window, args.grid)
    doc = _envelope(args, spec, {"beta": args.beta, "window": list(window), "grid": args.grid})
    doc["results"] = {"agreement": bool(agree)}
    _write_report(outdir, "oracle", doc, args.format)
    print(json.dumps(doc["results"], sort_keys=True))
    return 0


_COMMANDS = {
    "tc": _cmd_tc,
    "bad-scan": _cmd_bad_scan,
    "kernel": _cmd_kernel,
    "eta": _cmd_eta,
    "traj": _cmd_traj,
    "simulate": _cmd_simulate,
    "limitpot": _cmd_limitpot,
    "oracle": _cmd_oracle,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gibbs-dyn",
        description="Gibbs-non-Gibbs dynamical transition analysis for mean-field Brownian spins.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, t=False, alpha=False, n=False, window=None, grid=None):
        p.add_argument("--potential", required=True, help="path to a potential spec JSON")
        p.add_argument("--out", default=".", help="output directory (default: current)")
        p.add_argument("--format", choices=FORMAT_CHOICES, default="both")
        p.add_argument("--threads", type=int, default=1, help="worker cap for scans")
        p.add_argument(
            "--eps-val-rel", type=float, default=tilted.DEFAULT_TOL.eps_val_rel,
            help="relative tie band for minimiser values (default: %(default)g)",
        )
        p.add_argument(
            "--delta-cluster", type=float, default=tilted.DEFAULT_TOL.delta_cluster,
            help="minimum separation of reported minimisers (default: %(default)g)",
        )
        p.add_argument(
            "--truncation-mass", type=float, default=kernels.DEFAULT_QUAD.truncation_mass,
            help="Gaussian tail mass dropped by quadrature windows (default: %(default)g)",
        )
        p.add_argument(
            "--quad-grid", type=int, default=kernels.DEFAULT_QUAD.grid_n,
            help="quadrature grid points (default: %(default)d)",
        )
        if t:
            p.add_argument("--t", type=float, required=True, help="evolution time")
        if alpha:
            p.add_argument("--alpha", type=float, required=True, help="conditioning magnetisation")
        if n:
            p.add_argument("--n", type=int, required=True, help="number of spins")
        if window is not None:
            p.add_argument("--window", default=window, help="scan window 'a,b'")
        if grid is not None:
            p.add_argument("--grid", type=int, default=grid, help="grid point count")

    common(sub.add_parser("tc", help="crossover time and Gibbs status"))
    common(sub.add_parser("bad-scan", help="scan for bad magnetisations"), t=True, window="-5,5", grid=1001)
    pk = sub.add_parser("kernel", help="first-spin conditional kernel")
    common(pk, alpha=True, n=True)
    pk.add_argument("--t", type=float, default=0.0, help="time (0 selects the initial kernel)")
    common(sub.add_parser("eta", help="two-layer magnetisation kernel"), t=True, alpha=True, n=True)
    common(sub.add_parser("traj", help="minimising trajectories"), t=True, alpha=True, grid=1024)
    ps = sub.add_parser("simulate", help="Monte Carlo conditional sampling")
    common(ps, t=True, alpha=True, n=True)
    ps.add_argument("--replicas", type=int, default=100_000)
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--binwidth", type=float, default=0.05, help="conditioning bin halfwidth")
    ps.add_argument("--method", choices=(mc_sim.METHOD_AUTO, mc_sim.METHOD_REJECT, mc_sim.METHOD_EXACT), default=mc_sim.METHOD_AUTO)
    common(sub.add_parser("limitpot", help="limiting evolved potential"), t=True, window="-5,5", grid=201)
    po = sub.add_parser("oracle", help="tilt/curvature equivalence brute-force check")
    common(po, window="-6,6", grid=201)
    po.add_argument("--beta", type=float, required=True, help="curvature bound to test")
    return parser


def run(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        spec = potential.from_json(args.potential)
    except (OSError, json.JSONDecodeError, KeyError) as err:
        print(f"gibbs-dyn: cannot read potential spec: {err}", file=sys.stderr)
        return 1
    except GibbsDynError as err:
        print(f"gibbs-dyn: invalid potential spec: {err}", file=sys.stderr)
        return 2

    outdir = Path(args.out)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        print(f"gibbs-dyn: cannot create output directory: {err}", file=sys.stderr)
        return 1
    log.info("command=%s potential=%s out=%s", args.command, args.potential, outdir)

    try:
        return _COMMANDS[args.command](args, spec, outdir)
    except GibbsDynError as err:
        print(f"gibbs-dyn: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"gibbs-dyn: IO failure: {err}", file=sys.stderr)
        return 1


def main() -> int:
    return run()


if __name__ == "__main__":
    raise SystemExit(main())
