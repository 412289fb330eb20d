"""Batch command line front end.

Every run writes its outputs plus a `manifest.txt` (model hash, options, tool
version, seed) sufficient to reproduce the run.  Exit codes: 0 analytic
success, 1 analytic negative result (e.g. not separable, not certified), 2
usage or model errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import bound_report, gamma_sweep
from .catalog import CATALOG_NAMES, catalog
from .ergodicity import certify
from .model import InvalidParam, ModelError, validate_model
from .modelfile import load_model
from .numerics import auto_truncate, check_cut_structure, export_csv, metrics, solve_truncated
from .separability import separability_report
from .simulate import SimConfig, simulate

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_ERROR = 2

_CATALOG_PARAMS = ("lam", "mu", "nu", "gamma", "eta", "b", "depth")


def _add_model_source(parser):
    src = parser.add_argument_group("model source (exactly one)")
    src.add_argument("--model", metavar="FILE", help="model definition file (YAML)")
    src.add_argument("--catalog", metavar="NAME", choices=CATALOG_NAMES, help="catalog model name")
    parser.add_argument("--lambda", dest="lam", type=float, help="arrival rate")
    parser.add_argument("--mu", type=float, help="service rate")
    parser.add_argument("--nu", type=float, help="replenishment rate")
    parser.add_argument("--gamma", type=float, help="ageing / switch-off rate")
    parser.add_argument("--eta", type=float, help="switch-on rate")
    parser.add_argument("--b", type=int, help="base stock level")
    parser.add_argument("--depth", type=int, help="prefix depth for linear-rate catalog models")
    parser.add_argument("--out", default=".", help="output directory (default: current)")


def _resolve_model(args):
    if bool(args.model) == bool(args.catalog):
        raise InvalidParam("supply exactly one of --model FILE or --catalog NAME")
    if args.model:
        return load_model(args.model)
    params = {p: getattr(args, p) for p in _CATALOG_PARAMS if getattr(args, p, None) is not None}
    return catalog(args.catalog, **params)


def _write_manifest(args, model, outdir: Path, extra=None):
    digest = hashlib.sha256(model.signature().encode()).hexdigest()
    lines = {
        "tool": "envqueue",
        "version": __version__,
        "command": args.command,
        "model_hash": digest,
        "model_source": args.model or f"catalog:{args.catalog}",
    }
    for p in _CATALOG_PARAMS:
        value = getattr(args, p, None)
        if value is not None:
            lines[p] = value
    for key in ("N", "tol", "seed", "horizon", "replications", "kind", "method", "n_check"):
        value = getattr(args, key, None)
        if value is not None:
            lines[key] = value
    if extra:
        lines.update(extra)
    with open(outdir / "manifest.txt", "w", encoding="utf-8", newline="\n") as fh:
        for key, value in lines.items():
            fh.write(f"{key}={value}\n")


def _write_json(outdir: Path, name: str, record) -> None:
    with open(outdir / name, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(record, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")


def _cmd_validate(args, outdir):
    model = _resolve_model(args)
    n_check = args.n_check or (model.tail_start + model.period + 4)
    report = validate_model(model, n_check)
    record = {
        "passed": report.passed,
        "n_check": report.n_check,
        "violations": [list(v) for v in report.violations],
        "warnings": [list(w) for w in report.warnings],
    }
    _write_manifest(args, model, outdir)
    _write_json(outdir, "validation.json", record)
    status = "PASS" if report.passed else "FAIL"
    print(f"validate: {status} ({len(report.violations)} violations, {len(report.warnings)} warnings)")
    for kind, where, detail in report.violations + report.warnings:
        print(f"  {kind} at {where}: {detail}")
    return EXIT_OK if report.passed else EXIT_NEGATIVE


def _cmd_separability(args, outdir):
    model = _resolve_model(args)
    record = separability_report(model, tol=args.tol)
    _write_manifest(args, model, outdir)
    _write_json(outdir, "separability.json", record)
    if record["separable"]:
        print("separable: product form steady state")
        print(f"  tail ratio = {record['tail_ratio']:.12g}, C = {record['C']:.12g}")
        for label, t in zip(model.env.labels, record["theta"]):
            print(f"  theta({label}) = {t:.12g}")
        return EXIT_OK
    print(f"not separable: {record['reason']} (tail ratio {record['tail_ratio']:.12g})")
    return EXIT_NEGATIVE


def _cmd_certify(args, outdir):
    model = _resolve_model(args)
    result = certify(model, kind=args.kind)
    _write_manifest(args, model, outdir)
    if result.certified:
        _write_json(outdir, "certificate.json", result.to_record())
        print(f"certified ergodic: kind={result.kind}, eps={result.eps:.6g}, "
              f"eps_tilde={result.eps_tilde:.6g}, worst margin {result.worst_margin:.3e}")
        return EXIT_OK
    _write_json(outdir, "certificate.json", {"certified": False, "reason": result.reason, "detail": result.detail})
    print(f"not certified: {result.reason} {result.detail}")
    return EXIT_NEGATIVE


def _cmd_solve(args, outdir):
    model = _resolve_model(args)
    if args.N:
        sol = solve_truncated(model, args.N, method=args.method)
    else:
        sol = auto_truncate(model, tol=args.tol, method=args.method)
    m = metrics(sol, model)
    cut = check_cut_structure(sol, model)
    export_csv(sol, model, outdir / "stationary.csv")
    record = m.to_record()
    record.update(
        {
            "N": sol.N,
            "residual": sol.residual,
            "truncation_estimate": sol.truncation_estimate,
            "cut_worst_relative": cut.worst_relative,
        }
    )
    _write_manifest(args, model, outdir)
    _write_json(outdir, "metrics.json", record)
    print(f"solved at N={sol.N}: throughput={m.throughput:.9g}, "
          f"P(blocked)={m.blocked_probability:.9g}, residual={sol.residual:.3e}")
    return EXIT_OK


def _cmd_simulate(args, outdir):
    model = _resolve_model(args)
    config = SimConfig(seed=args.seed, horizon=args.horizon, replications=args.replications)
    result = simulate(model, config)
    est = result.estimate
    record = {
        "mean": est.mean,
        "half_width": est.half_width,
        "per_replication": list(est.per_replication),
        "seed": args.seed,
        "total_jumps": result.total_jumps,
    }
    _write_manifest(args, model, outdir)
    _write_json(outdir, "simulation.json", record)
    with open(outdir / "simulation.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("replication,throughput\n")
        for i, value in enumerate(est.per_replication):
            fh.write(f"{i},{value:.17g}\n")
    print(f"simulated throughput = {est.mean:.6g} +/- {est.half_width:.6g} (95%)")
    return EXIT_OK


def _require(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise InvalidParam(f"missing required options: {', '.join('--' + m for m in missing)}")


def _cmd_bounds(args, outdir):
    _require(args, "lam", "mu", "nu", "gamma", "b")
    sim_config = None
    if args.replications:
        sim_config = SimConfig(seed=args.seed, horizon=args.horizon, replications=args.replications)
    report = bound_report(args.lam, args.mu, args.nu, args.gamma, args.b, sim_config=sim_config)
    from .catalog import perishable_o

    _write_manifest(args, perishable_o(args.lam, args.mu, args.nu, args.gamma, args.b), outdir)
    _write_json(outdir, "bounds.json", report.to_record())
    with open(outdir / "bounds.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("gamma,TH_minus,TH_o,TH_plus\n")
        fh.write(f"{args.gamma:.17g},{report.TH_minus:.17g},{report.TH_o_truncated:.17g},{report.TH_plus:.17g}\n")
    verdict = "holds" if report.ordering_holds else "VIOLATED"
    print(f"TH- = {report.TH_minus:.9g} <= TH_o = {report.TH_o_truncated:.9g} "
          f"<= TH+ = {report.TH_plus:.9g}: ordering {verdict} ({report.regime})")
    return EXIT_OK if report.ordering_holds else EXIT_NEGATIVE


def _cmd_sweep(args, outdir):
    _require(args, "lam", "mu", "nu", "b")
    gammas = np.linspace(args.gamma_min, args.gamma_max, args.gamma_steps)
    rows = gamma_sweep(args.lam, args.mu, args.nu, args.b, gammas, truncation_tol=args.tol)
    from .catalog import perishable_o

    _write_manifest(args, perishable_o(args.lam, args.mu, args.nu, gammas[0], args.b), outdir,
                    extra={"gamma_min": args.gamma_min, "gamma_max": args.gamma_max, "gamma_steps": args.gamma_steps})
    with open(outdir / "sweep.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("gamma,TH_minus,TH_o,TH_plus\n")
        for gamma, th_m, th_o, th_p in rows:
            fh.write(f"{gamma:.17g},{th_m:.17g},{th_o:.17g},{th_p:.17g}\n")
    print(f"sweep: {len(rows)} points written to sweep.csv")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="envqueue",
        description="Analysis of exponential queues in a finite interactive random environment",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="structural validation of a model")
    _add_model_source(p)
    p.add_argument("--n-check", type=int, default=None)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("separability", help="product-form decision and theta")
    _add_model_source(p)
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(func=_cmd_separability)

    p = sub.add_parser("certify", help="Lyapunov ergodicity certificate")
    _add_model_source(p)
    p.add_argument("--kind", choices=("linear_drift", "hitting_time"), default="linear_drift")
    p.set_defaults(func=_cmd_certify)

    p = sub.add_parser("solve", help="truncated stationary distribution and metrics")
    _add_model_source(p)
    p.add_argument("--N", type=int, default=None, help="truncation level (default: automatic)")
    p.add_argument("--method", choices=("elimination", "power"), default="elimination")
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("simulate", help="Monte Carlo throughput estimate")
    _add_model_source(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon", type=float, default=1e4)
    p.add_argument("--replications", type=int, default=10)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("bounds", help="two-sided throughput bounds for the perishable system")
    _add_model_source(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon", type=float, default=1e4)
    p.add_argument("--replications", type=int, default=0, help="0 disables simulation")
    p.set_defaults(func=_cmd_bounds)

    p = sub.add_parser("sweep", help="bound throughputs over a gamma grid")
    _add_model_source(p)
    p.add_argument("--gamma-min", type=float, default=0.1)
    p.add_argument("--gamma-max", type=float, default=2.0)
    p.add_argument("--gamma-steps", type=int, default=10)
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=_cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    outdir = Path(args.out)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        return args.func(args, outdir)
    except (ModelError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
