"""Command line entry point: ``warpflow {validate,run,analyze,compare,soliton}``.

Exit codes: 0 pass, 1 acceptance failure, 2 configuration error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import harness as H
from . import soliton as S
from .errors import ConfigError, DomainError, NumericError, ParameterError, SchemaError, SingularityImminent, \
    SingularStateError


def _print(obj):
    json.dump(H._clean(obj), sys.stdout, sort_keys=True, indent=1)
    sys.stdout.write("\n")


def _config(args):
    return H.load_config(args.config, args.set or ())


def cmd_validate(args):
    rep = H.validate_experiment(_config(args))
    _print(rep)
    return H.EXIT_OK if rep["passed"] else H.EXIT_ACCEPTANCE


def cmd_run(args):
    cfg = _config(args)
    status, out = H.run_experiment(cfg, args.out)
    print(f"artifacts written to {out}")
    return status


def cmd_analyze(args):
    res = H.analyze(args.dir)
    _print({"consistent": res["consistent"], "passed": res["passed"]})
    return H.EXIT_OK if res["consistent"] and all(res["passed"].values()) else H.EXIT_ACCEPTANCE


def cmd_compare(args):
    res = H.compare_runs(args.dir_a, args.dir_b)
    _print({"max_rel_diff": res["max_rel_diff"], "metrics": res["metrics"] if args.verbose else len(res["metrics"])})
    return H.EXIT_OK if res["max_rel_diff"] <= args.tolerance else H.EXIT_ACCEPTANCE


def cmd_soliton(args):
    try:
        if args.lam >= 0:
            raise ParameterError("lambda must be negative")
        c1, c2 = np.sqrt((args.p1 - 1) / -args.lam), np.sqrt((args.p2 - 1) / -args.lam)
        y = np.linspace(-args.span, args.span, 2 * int(round(args.span / args.dy)) + 1)
        const = S.max_residual(S.constant_solution(args.p1, args.p2, args.lam, y))
        sol = S.integrate_ivp(args.p1, args.p2, args.lam, 0.0, [0.0, c1 * (1 + args.perturb), 0.0, c2, 0.0],
                              args.span, dy=args.dy)
    except (ParameterError, DomainError) as exc:
        raise ConfigError("soliton", str(exc)) from exc
    summary = {"p1": args.p1, "p2": args.p2, "lambda": args.lam, "constant_phi": [c1, c2],
               "constant_residual_max": const, "perturbation": args.perturb,
               "departure": S.departure(sol), "stopped_early": sol.stopped_early,
               "differenced_residual_max": S.max_residual(S.differenced(sol)) if sol.y.size > 2 else None}
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["y", "f", "phi1", "phi1_y", "phi2", "phi2_y"])
            for row in zip(sol.y, sol.f, sol.phi1, sol.phi1_y, sol.phi2, sol.phi2_y):
                w.writerow([repr(float(v)) for v in row])
    _print(summary)
    return H.EXIT_OK if const <= 1e-12 else H.EXIT_ACCEPTANCE


def build_parser():
    p = argparse.ArgumentParser(prog="warpflow", description="Ricci flow of multiply-warped products")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn, help_ in (("validate", cmd_validate, "check the initial-data assumptions only"),
                            ("run", cmd_run, "integrate and write the artifact tree")):
        q = sub.add_parser(name, help=help_)
        q.add_argument("config", help="JSON experiment config")
        q.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config field, e.g. spec.eta=2")
        if name == "run":
            q.add_argument("--out", help="output directory (default under $%s)" % H.OUTPUT_ROOT_ENV)
        q.set_defaults(func=fn)
    q = sub.add_parser("analyze", help="recompute verdicts from a run's initial checkpoint")
    q.add_argument("dir")
    q.set_defaults(func=cmd_analyze)
    q = sub.add_parser("compare", help="relative differences between two runs")
    q.add_argument("dir_a")
    q.add_argument("dir_b")
    q.add_argument("--tolerance", type=float, default=0.0)
    q.add_argument("--verbose", action="store_true")
    q.set_defaults(func=cmd_compare)
    q = sub.add_parser("soliton", help="constant solutions and perturbed IVPs of the soliton ODE")
    q.add_argument("--p1", type=int, default=2)
    q.add_argument("--p2", type=int, default=2)
    q.add_argument("--lam", type=float, default=-1.0)
    q.add_argument("--perturb", type=float, default=0.01, help="relative perturbation of phi1 at y=0")
    q.add_argument("--span", type=float, default=2.0)
    q.add_argument("--dy", type=float, default=1e-3)
    q.add_argument("--csv", help="write the IVP profile here")
    q.set_defaults(func=cmd_soliton)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return H.EXIT_CONFIG
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return H.EXIT_CONFIG
    except (NumericError, SingularityImminent, SingularStateError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return H.EXIT_NUMERIC
