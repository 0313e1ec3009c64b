"""Command-line interface: ``nnfunc estimate | simulate | weights | diagnose``.

Every output line is either a ``#`` comment or a CSV record. Exit codes:
0 success, 2 usage, input or configuration error, 3 estimation failure.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
import warnings
from dataclasses import replace

import numpy as np

from . import __version__
from .diagnostics import ClassParams, derive_params, k_range
from .errors import EstimationError
from .estimators import EstimatorConfig, estimate
from .functionals import OneSampleSpec, Regularity, parse_functional
from .geometry import Sample
from .sim import ConfigError, load_config, run_experiment
from .uncertainty import confidence_interval, variance_estimate, variance_estimate_one_sample
from .weights import solve_general_weights, solve_kl_weights, solve_renyi_weights

__all__ = ["main", "read_csv_points", "InputError"]

EXIT_OK, EXIT_INPUT, EXIT_ESTIMATION = 0, 2, 3


class InputError(ValueError):
    """Unreadable or malformed input."""


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def read_csv_points(path: str) -> np.ndarray:
    """Read a CSV of reals into an (m, d) array; a non-numeric first line is a header."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: cannot open ({exc.strerror})") from None
    rows: list[list[float]] = []
    width = None
    with fh:
        for lineno, rec in enumerate(csv.reader(fh), 1):
            if not rec or all(not f.strip() for f in rec):
                continue
            fields = [f.strip() for f in rec]
            if lineno == 1 and not all(_is_number(f) for f in fields):
                continue
            try:
                vals = [float(f) for f in fields]
            except ValueError:
                raise InputError(f"{path}:{lineno}: non-numeric field in {','.join(fields)!r}") from None
            if not all(math.isfinite(v) for v in vals):
                raise InputError(f"{path}:{lineno}: non-finite value")
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise InputError(f"{path}:{lineno}: expected {width} columns, found {len(vals)}")
            rows.append(vals)
    if not rows:
        raise InputError(f"{path}: no data rows")
    return np.array(rows, dtype=float)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _emit(out, header: list[str], rows: list[tuple]) -> None:
    for h in header:
        out.write(f"# {h}\n")
    w = csv.writer(out, lineterminator="\n")
    for r in rows:
        w.writerow([_fmt(v) if not isinstance(v, str) else v for v in r])


def _k_arg(text: str):
    if text == "auto":
        return "auto"
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer or 'auto', got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"k must be positive, got {v}")
    return v


def cmd_estimate(args, out) -> int:
    spec = parse_functional(args.functional)
    one = isinstance(spec, OneSampleSpec)
    if one and args.y is not None:
        raise InputError(f"{spec.name} is a one-sample functional; omit --y")
    if not one and args.y is None:
        raise InputError(f"{spec.name} is a two-sample functional; --y is required")
    if not 0.0 < args.ci_level < 1.0:
        raise InputError("--ci-level must lie in (0, 1)")
    X = Sample(read_csv_points(args.x))
    Y = Sample(read_csv_points(args.y)) if not one else None
    mode = {"none": "unweighted", "general": "general", "class": "class"}[args.weighting]
    cfg = EstimatorConfig(kX=args.kX, kY=args.kY, weight_mode=mode, c=args.c, debias=args.debias or mode == "class")
    resolved = cfg.resolved(X.m, None if one else Y.m, spec)
    report = estimate(X, Y, spec, resolved)
    if one:
        var = variance_estimate_one_sample(X, spec, resolved.kX)
    else:
        var = variance_estimate(X, Y, spec, resolved.kX, resolved.kY)
    ci = confidence_interval(report.value, var, X.m, None if one else Y.m, 1.0 - args.ci_level)
    wused = report.weights_used
    wdesc = "none" if wused is None else ";".join(w.describe() for w in wused if w is not None)
    header = [
        f"command=estimate functional={spec.name} estimator={report.estimator}",
        f"x={args.x} m={X.m} d={X.d}" + ("" if one else f" y={args.y} n={Y.m}"),
        f"kX={resolved.kX}" + ("" if one else f" kY={resolved.kY}") + f" c={args.c:g} weights={wdesc}",
        f"truncation_level={var.truncation_level!r}",
    ]
    rows = [
        ("quantity", "value"),
        ("estimate", report.value),
        ("v1hat", var.v1hat),
        ("v2hat", var.v2hat),
        ("ci_level", args.ci_level),
        ("ci_lower", ci.lower),
        ("ci_upper", ci.upper),
        ("kX", resolved.kX),
        ("kY", resolved.kY if not one else ""),
        ("weights", wdesc),
    ]
    _emit(out, header, rows)
    return EXIT_OK


def cmd_simulate(args, out) -> int:
    try:
        cfg = load_config(args.config)
    except OSError as exc:
        raise InputError(f"{args.config}: cannot open ({exc.strerror})") from None
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    res = run_experiment(cfg, workers=args.workers)
    text = res.to_csv()
    if args.output:
        try:
            with open(args.output, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise InputError(f"{args.output}: cannot write ({exc.strerror})") from None
    else:
        out.write(text)
    return EXIT_OK


def cmd_weights(args, out) -> int:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if args.cls == "general":
            wv = solve_general_weights(args.k, args.d, args.order, args.c)
        elif args.cls == "kl":
            wv = solve_kl_weights(args.k, args.d, args.c)
        else:
            if args.b is None:
                raise InputError("--b is required for --class renyi")
            wv = solve_renyi_weights(args.k, args.d, args.b, args.c)
    header = [f"command=weights {wv.describe()}", f"l1_norm={wv.l1_norm!r} l2_norm={wv.l2_norm!r}"]
    header += [f"residual[{i}]={float(r)!r}" for i, r in enumerate(wv.residuals())]
    header += [f"warning: {w.message}" for w in caught]
    rows = [("index", "weight")] + [(j, float(wv.w[j - 1])) for j in range(1, wv.k + 1)]
    _emit(out, header, rows)
    return EXIT_OK


def cmd_diagnose(args, out) -> int:
    reg = Regularity(args.kappa1, args.kappa2, args.beta1, args.beta2, args.L)
    params = ClassParams(args.alpha, args.beta, args.lambda1, args.lambda2, args.gamma, args.C, reg)
    dp = derive_params(args.d, params)
    header = [
        f"command=diagnose d={args.d} alpha={args.alpha:g} beta={args.beta:g} lambda1={args.lambda1:g} "
        f"lambda2={args.lambda2:g} gamma={args.gamma:g} C={args.C:g}",
        f"kappa1={args.kappa1:g} kappa2={args.kappa2:g} beta1*={args.beta1:g} beta2*={args.beta2:g} L={args.L:g}",
    ]
    rows = [("parameter", "value")] + dp.rows()
    if args.m is not None:
        n = args.n if args.n is not None else args.m
        try:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                kr = k_range(args.d, params, args.m, n)
            rows += list(zip(("kX_lo", "kX_hi", "kY_lo", "kY_hi"), kr))
            header += [f"warning: {w.message}" for w in caught]
        except ValueError as exc:
            header.append(f"warning: {exc}")
    _emit(out, header, rows)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nnfunc", description="Nearest-neighbour functional estimation.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("estimate", help="estimate a functional from CSV samples")
    e.add_argument("--x", required=True, help="CSV of the first sample")
    e.add_argument("--y", help="CSV of the second sample (two-sample functionals)")
    e.add_argument("--functional", required=True, help="kl, renyi:<kappa>, intfg, shannon, renyi-entropy:<kappa>")
    e.add_argument("--kX", "--k", dest="kX", type=_k_arg, default="auto")
    e.add_argument("--kY", type=_k_arg, default="auto")
    e.add_argument("--weighting", choices=("none", "general", "class"), default="none")
    e.add_argument("--debias", action="store_true")
    e.add_argument("--c", type=float, default=0.25)
    e.add_argument("--ci-level", type=float, default=0.95)
    e.set_defaults(func=cmd_estimate)

    s = sub.add_parser("simulate", help="run a Monte Carlo experiment from a key=value config")
    s.add_argument("config")
    s.add_argument("--seed", type=int, default=None, help="base seed (overrides the config; default 0)")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--output", help="write CSV here instead of standard output")
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("weights", help="print a weight vector and its constraint residuals")
    w.add_argument("--k", type=int, required=True)
    w.add_argument("--d", type=int, required=True)
    w.add_argument("--class", dest="cls", choices=("general", "kl", "renyi"), default="general")
    w.add_argument("--c", type=float, default=0.25)
    w.add_argument("--b", type=float)
    w.add_argument("--order", type=int, default=0, help="moment order I of the general class")
    w.set_defaults(func=cmd_weights)

    d = sub.add_parser("diagnose", help="derived rate parameters and k-range guidance")
    d.add_argument("--d", type=int, required=True)
    for name in ("alpha", "beta", "lambda1", "lambda2", "gamma"):
        d.add_argument(f"--{name}", type=float, required=True)
    d.add_argument("--C", type=float, default=1.0)
    d.add_argument("--kappa1", type=float, default=0.05)
    d.add_argument("--kappa2", type=float, default=0.05)
    d.add_argument("--beta1", type=float, default=4.0, help="beta1*")
    d.add_argument("--beta2", type=float, default=4.0, help="beta2*")
    d.add_argument("--L", type=float, default=2.0)
    d.add_argument("--m", type=int)
    d.add_argument("--n", type=int)
    d.set_defaults(func=cmd_diagnose)
    return p


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    if getattr(args, "workers", 1) is not None and getattr(args, "workers", 1) < 1:
        print("nnfunc: error: --workers must be at least 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args, out)
    except EstimationError as exc:
        print(f"nnfunc: estimation error: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except (InputError, ConfigError, ValueError) as exc:
        print(f"nnfunc: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
