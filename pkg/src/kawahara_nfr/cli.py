"""Command-line driver: ``kawahara-nfr <subcommand> [options]``.

Exit codes: 0 success, 1 validation or envelope failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .data import PROFILES, initial_data
from .estimates import (ProbeConfig, calibrate_constant, probe_bilinear_scaling, probe_compositions,
                        probe_ibp_identity, probe_level_decay, probe_partitions, probe_remainder,
                        probe_sup_bilinear, probe_weighted_scaling, reports_csv)
from .nfe import (ContractionValidationError, NfeConfig, PicardNonConvergence, duhamel_residual,
                  picard_solve, validate_contraction_params)
from .operators import CutoffChain
from .reference import RefConfig, solve
from .spectral import FrequencyGrid, hs_norm
from .trees import enumerate_chronicles

logger = logging.getLogger("kawahara_nfr")

_PI = re.compile(r"^\s*([0-9.eE+-]*)\s*\*?\s*pi\s*$")


def length(text: str) -> float:
    """Parse a box length: a float, or a multiple of pi such as ``8pi``."""
    m = _PI.match(str(text))
    if m:
        coef = m.group(1)
        return (float(coef) if coef else 1.0) * np.pi
    return float(text)


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("NFR_THREADS")
    return max(1, int(env)) if env else 1


# ---------------------------------------------------------------------------
# argument parsing


def _grid_args(p, L="8pi", n=64):
    p.add_argument("--L", type=length, default=length(L), help="box length, e.g. 8pi")
    p.add_argument("--n", type=int, default=n, help="number of Fourier modes")
    p.add_argument("--beta", type=float, default=1.0)


def _data_args(p):
    p.add_argument("--profile", choices=sorted(PROFILES), default="sech2")
    p.add_argument("--width", type=float, default=0.5, help="width of sech2/gaussian profiles")
    p.add_argument("--modes", type=int, nargs="+", default=[1], help="wavenumbers of trig data")
    p.add_argument("--size", type=float, default=0.1, help="H^s norm of the initial datum")


def _nfe_args(p):
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--s", type=float, default=0.0)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--N", type=float, default=100.0)
    p.add_argument("--T", type=float, default=0.01)
    p.add_argument("--K", type=int, default=3)
    p.add_argument("--n-t", dest="n_t", type=int, default=32)
    p.add_argument("--picard-tol", type=float, default=1e-12)
    p.add_argument("--max-picard-iters", type=int, default=50)
    p.add_argument("--C-est", dest="C_est", type=float, default=1.0)
    p.add_argument("--C-est-from", dest="C_est_from", default=None,
                   help="probe-estimates summary JSON whose calibrated C_est replaces --C-est")
    p.add_argument("--quadrature", choices=["trapezoid", "filon"], default="trapezoid")
    p.add_argument("--override-validation", action="store_true")


def _ref_args(p):
    p.add_argument("--dt", type=float, default=1e-4)
    p.add_argument("--dealias-fraction", type=float, default=2.0 / 3.0)
    p.add_argument("--dealias-mode", choices=["mask", "pad"], default="mask")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="JSON file of option defaults")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--format", choices=["csv", "json"], default="json")
    common.add_argument("--threads", type=int, default=None, help="worker cap (env NFR_THREADS)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="kawahara-nfr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enumerate-trees", parents=[common], help="list chronicles of k generations")
    p.add_argument("--k", type=int, required=True)

    p = sub.add_parser("validate-params", parents=[common], help="check the contraction conditions")
    _nfe_args(p)

    p = sub.add_parser("solve-reference", parents=[common], help="IFRK4 pseudo-spectral oracle")
    _grid_args(p)
    _data_args(p)
    _ref_args(p)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--s", type=float, default=0.0)
    p.add_argument("--stride", type=int, default=1)

    p = sub.add_parser("solve-nfe", parents=[common], help="Picard solve of the normal form equation")
    _grid_args(p)
    _data_args(p)
    _nfe_args(p)
    p.add_argument("--backward", action="store_true", help="solve on [-T, 0]")
    p.add_argument("--path-stride", type=int, default=1)

    p = sub.add_parser("compare", parents=[common], help="NFE solutions against the oracle")
    _grid_args(p)
    _data_args(p)
    _nfe_args(p)
    _ref_args(p)
    p.add_argument("--K-list", dest="K_list", type=int, nargs="+", default=[2, 3])
    p.add_argument("--substeps", type=int, default=64, help="oracle steps per NFE time step")

    p = sub.add_parser("probe-estimates", parents=[common], help="numerical estimate probes")
    _grid_args(p, L="16pi", n=128)
    p.add_argument("--probe", nargs="+", default=["all"],
                   choices=["all", "bilinear", "weighted", "level", "remainder", "sup", "ibp",
                            "compositions", "partitions"])
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--s", type=float, default=0.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--M-exponents", type=int, nargs=2, default=[4, 14], help="dyadic range 2^a..2^b")
    p.add_argument("--N-list", dest="N_list", type=float, nargs="+", default=[1e2, 1e3, 1e4])
    p.add_argument("--k-range", dest="k_range", type=int, nargs="+", default=[2, 3])
    p.add_argument("--level-L", type=length, default=length("4pi"))
    p.add_argument("--level-n", type=int, default=64)
    p.add_argument("--remainder-L", type=length, default=length("2pi"))
    p.add_argument("--ibp-L", type=length, default=length("64pi"))
    p.add_argument("--ibp-dt", type=float, default=1e-4)
    p.add_argument("--ibp-N", type=float, default=5.0)
    return parser


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            payload = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            parser.error(f"cannot read config {args.config}: {exc}")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(payload) - known)
        if unknown:
            parser.error(f"unknown config keys: {', '.join(unknown)}")
        # config values become defaults; explicit flags still win
        sub.set_defaults(**payload)
        args = parser.parse_args(argv)
    return args


# ---------------------------------------------------------------------------
# helpers


def _echo(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items())}


def _emit(args, name: str, payload: dict, table=None):
    """Write ``payload`` (JSON) or ``table`` (CSV rows) to ``--out`` if given."""
    if not args.out:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.format == "csv" and table is not None:
        path = out / f"{name}.csv"
        path.write_text(table, encoding="utf-8", newline="")
    else:
        path = out / f"{name}.json"
        path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_jsonable), encoding="utf-8")
    return path


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(type(obj))


def _initial(args, grid):
    return initial_data(args.profile, grid, args.size, getattr(args, "s", 0.0), width=args.width,
                        modes=tuple(args.modes))


def _nfe_config(args, K=None) -> NfeConfig:
    C = args.C_est
    if args.C_est_from:
        C = float(json.loads(Path(args.C_est_from).read_text(encoding="utf-8"))["C_est"])
    return NfeConfig(args.r, args.s, args.delta, args.N, args.T, K or args.K, args.n_t,
                     args.picard_tol, args.max_picard_iters, C, args.quadrature)


def _csv(header, rows) -> str:
    import csv
    import io

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# subcommands


def cmd_enumerate_trees(args) -> int:
    chronicles = enumerate_chronicles(args.k)
    lines = [f"{c.positions} {c.to_string()}" for c in chronicles]
    print("\n".join(lines))
    print(f"count {len(chronicles)}")
    table = _csv(["index", "positions", "tree"], [[i, " ".join(map(str, c.positions)), c.to_string()]
                                                  for i, c in enumerate(chronicles)])
    _emit(args, f"chronicles_k{args.k}", {"config": _echo(args), "count": len(chronicles),
                                          "chronicles": [c.to_string() for c in chronicles]}, table)
    return 0


def cmd_validate_params(args) -> int:
    report = validate_contraction_params(_nfe_config(args))
    for name, lhs, rhs, ok in report.checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {lhs:.6g} vs {rhs:.6g}")
    print(f"binding: {report.binding}")
    _emit(args, "validation", {"config": _echo(args), "report": report.to_dict()},
          _csv(["check", "lhs", "rhs", "passed"], report.checks))
    return 0 if report.passed else 1


def cmd_solve_reference(args) -> int:
    grid = FrequencyGrid(args.L, args.n)
    u0 = _initial(args, grid)
    cfg = RefConfig(grid, args.dt, args.T, args.beta, args.dealias_fraction, args.stride, args.dealias_mode)
    result = solve(u0, cfg)
    diag = result.diagnostics(args.s)
    print(f"steps {cfg.n_steps}  L2 drift {diag['l2_drift']:.3e}  mean drift {diag['mean_drift']:.3e}")
    payload = {"config": _echo(args), "diagnostics": diag, "u_path": result.u_path.to_dict()}
    _emit(args, "reference", payload, result.trajectory_csv(args.s))
    return 0


def cmd_solve_nfe(args) -> int:
    grid = FrequencyGrid(args.L, args.n)
    u0 = _initial(args, grid)
    cfg = _nfe_config(args)
    try:
        path, diag = picard_solve(u0, cfg, args.beta, -1 if args.backward else 1,
                                  args.override_validation, _threads(args))
    except ContractionValidationError as exc:
        print(str(exc))
        _emit(args, "nfe", {"config": _echo(args), "validation": exc.report.to_dict()})
        return 1
    except PicardNonConvergence as exc:
        print(str(exc))
        _emit(args, "nfe", {"config": _echo(args), "distances": exc.history})
        return 1
    residual = duhamel_residual(path, u0, cfg, args.beta, _threads(args))
    flag = " (outside validated regime)" if diag.overridden else ""
    print(f"iterations {diag.iterations}  contraction ratio {diag.contraction_ratio:.3e}  "
          f"Duhamel residual {residual:.3e}{flag}")
    payload = {"config": _echo(args), "nfe_config": cfg.to_dict(), "diagnostics": diag.to_dict(),
               "residual": residual, "path": path.to_dict(args.path_stride)}
    rows = [[repr(float(t)), repr(float(a))] for t, a in zip(path.times, path.hs_norms(args.s))]
    _emit(args, "nfe", payload, _csv(["time", "hs_norm"], rows))
    return 0


def cmd_compare(args) -> int:
    grid = FrequencyGrid(args.L, args.n)
    u0 = _initial(args, grid)
    base = _nfe_config(args)
    ref_cfg = RefConfig(grid, base.T / base.n_t / args.substeps, base.T, args.beta, args.dealias_fraction,
                        args.substeps, args.dealias_mode)
    oracle = solve(u0, ref_cfg).v_path
    rows, entries, status = [], [], 0
    for K in args.K_list:
        cfg = _nfe_config(args, K)
        try:
            path, diag = picard_solve(u0, cfg, args.beta, 1, args.override_validation, _threads(args))
        except (ContractionValidationError, PicardNonConvergence) as exc:
            print(f"K={K}: {exc}")
            status = 1
            continue
        dist = path.sup_distance(oracle, cfg.s)
        rows.append([K, repr(dist), repr(dist / hs_norm(u0, cfg.s)) if hs_norm(u0, cfg.s) else "nan",
                     diag.iterations, repr(diag.contraction_ratio)])
        entries.append({"K": K, "distance": dist, "diagnostics": diag.to_dict()})
        print(f"K={K}  sup-time distance {dist:.3e}  iterations {diag.iterations}  "
              f"contraction {diag.contraction_ratio:.3e}")
    table = _csv(["K", "distance", "relative_distance", "iterations", "contraction_ratio"], rows)
    _emit(args, "compare", {"config": _echo(args), "results": entries}, table)
    return status


def cmd_probe_estimates(args) -> int:
    wanted = set(args.probe)
    if "all" in wanted:
        wanted = {"bilinear", "weighted", "level", "remainder", "sup", "ibp", "compositions", "partitions"}
    M_list = tuple(2.0**e for e in range(args.M_exponents[0], args.M_exponents[1] + 1))
    grid = FrequencyGrid(args.L, args.n)
    base = dict(seed=args.seed, samples=args.samples, s=args.s, sigma=args.sigma, beta=args.beta,
                M_list=M_list, N_list=tuple(args.N_list), k_range=tuple(args.k_range), delta=args.delta)
    cfg = ProbeConfig(grid, **base)
    reports, identities, calibration = [], {}, []
    if "bilinear" in wanted:
        for kind in ("N_leq", "I_gt", "N_dyadic", "I_dyadic"):
            rep = probe_bilinear_scaling(kind, 0.0, cfg)
            reports.append(rep)
            if kind in ("N_leq", "I_gt"):
                calibration.append(rep)
    if "weighted" in wanted:
        for j in (1, 2):
            for kind in ("N_leq", "I_gt"):
                reports.append(probe_weighted_scaling(j, cfg, kind))
    if "level" in wanted:
        lcfg = ProbeConfig(FrequencyGrid(args.level_L, args.level_n), **base)
        for variant in ("N0", "N1"):
            reps = probe_level_decay(variant, lcfg)
            reports.extend(reps)
            calibration.extend(reps)
    if "remainder" in wanted:
        rcfg = ProbeConfig(FrequencyGrid(args.remainder_L, args.level_n), **base)
        reps = probe_remainder(rcfg)
        reports.extend(reps)
        identities["remainder_steps"] = reps[0].extra["step"] if reps else []
    if "sup" in wanted:
        reports.append(probe_sup_bilinear(cfg))
    if "compositions" in wanted:
        ccfg = ProbeConfig(FrequencyGrid(length("4pi"), 32), **base)
        identities["compositions"] = probe_compositions(ccfg, N=20.0)
    if "partitions" in wanted:
        ccfg = ProbeConfig(FrequencyGrid(length("4pi"), 32), **base)
        identities["partitions"] = probe_partitions(ccfg, N=20.0)
    if "ibp" in wanted:
        igrid = FrequencyGrid(args.ibp_L, args.n)
        u0 = initial_data("sech2", igrid, 0.1)
        path = solve(u0, RefConfig(igrid, args.ibp_dt, 100 * args.ibp_dt, args.beta,
                                   dealias_mode="pad")).v_path
        identities["ibp"] = probe_ibp_identity(2, CutoffChain(args.ibp_N, args.delta, 3), path, args.beta,
                                               args.s, every=5)
    failed = [r.name for r in reports if not r.passed]
    for r in reports:
        slope = "n/a" if r.slope is None else f"{r.slope:+.3f}"
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<34} C_hat {r.envelope:.4g}  slope {slope}")
    for key, val in identities.items():
        print(f"info  {key}: {json.dumps(val, default=_jsonable)}")
    summary = {"config": _echo(args), "probe_config": cfg.to_dict(), "failed": failed,
               "reports": [r.to_dict() for r in reports], "identities": identities}
    if calibration:
        summary["C_est"] = calibrate_constant(calibration)
        print(f"calibrated C_est {summary['C_est']:.6g}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "probes.csv").write_text(reports_csv(reports), encoding="utf-8", newline="")
        (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True, default=_jsonable),
                                          encoding="utf-8")
    return 1 if failed else 0


COMMANDS = {
    "enumerate-trees": cmd_enumerate_trees,
    "validate-params": cmd_validate_params,
    "solve-reference": cmd_solve_reference,
    "solve-nfe": cmd_solve_nfe,
    "compare": cmd_compare,
    "probe-estimates": cmd_probe_estimates,
}


def run(argv=None) -> int:
    """Parse ``argv`` and dispatch; returns the process exit code."""
    try:
        args = parse_args(sys.argv[1:] if argv is None else list(argv))
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else 2
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run())
