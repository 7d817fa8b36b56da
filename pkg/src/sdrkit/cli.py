"""``sdrkit`` command line: fit, simulate, eval, bench.

Exit codes: 0 success, 2 usage, 3 data, 4 numerical.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import __version__
from .errors import DataError, InvalidInputError, NumericalError
from .inverse import LabelBasis
from .io import BasisFile, coerce, parse_kv, read_config, read_csv, write_csv
from .kdr import KernelSpec
from .manifold import OptConfig
from .synthetic import METHODS, MODELS, GeneratorModel, fit_method, generate, run_benchmark, subspace_error

EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 2, 3, 4

SLICED = {"sir", "save", "dr", "lad"}
OPTIMIZED = {"lad", "cve", "kdr", "ukdr"}
KERNEL = {"kdr", "ukdr"}


class UsageError(Exception):
    pass


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def method_params(method: str, raw: dict, slices=None, ignored: list | None = None) -> dict:
    """Translate generic ``key=value`` knobs into keyword arguments of ``method``.

    Unknown keys raise :class:`UsageError` unless an ``ignored`` list is
    passed to collect them.
    """
    raw = {k: coerce(str(v)) for k, v in raw.items()}
    if slices is not None and method in SLICED:
        raw.setdefault("h", slices)
    out = {}
    kernel = {}
    basis = {}
    for key, val in raw.items():
        if key == "h" and method in SLICED:
            out["h"] = int(val)
        elif key == "strategy" and method in SLICED:
            out["strategy"] = val
        elif key == "c" and method == "cr":
            out["c"] = float(val)
        elif key == "bandwidth" and method in ("mave", "cve"):
            out["bandwidth_scale"] = float(val)
        elif key == "bandwidth" and method in KERNEL:
            kernel["bandwidth"] = val if val == "median-heuristic" else float(val)
        elif key == "kernel" and method in KERNEL:
            kernel["kind"] = val
        elif key == "epsilon" and method in KERNEL:
            kernel["ridge_eps"] = float(val)
        elif key == "max_iter" and method in OPTIMIZED:
            out["opt_cfg"] = OptConfig(max_iter=int(val))
        elif key == "max_iter" and method in ("mave", "pfc"):
            out["max_iter"] = int(val)
        elif key == "objective" and method == "kdr":
            out["objective"] = val
        elif key in ("basis", "basis_size") and method in ("pir", "pfc"):
            basis["kind" if key == "basis" else "size"] = val
        elif key == "noise" and method == "pfc":
            out["noise"] = val
        elif key == "max_samples" and method in KERNEL:
            out["max_samples"] = int(val)
        elif key == "ridge" and method not in ("phd", "kdr_hsic", "ukdr", "pfc"):
            out["ridge"] = float(val)
        elif ignored is not None:
            ignored.append(key)
        else:
            raise UsageError(f"parameter {key!r} is not understood by method {method!r}")
    try:
        if kernel:
            out["spec"] = KernelSpec(**kernel)
        if basis:
            out["basis_kind"] = LabelBasis(**basis)
    except (TypeError, InvalidInputError) as exc:
        raise UsageError(str(exc)) from exc
    return out


def _gather_params(args) -> dict:
    raw = {}
    if getattr(args, "config", None):
        raw.update(read_config(args.config))
    try:
        raw.update(parse_kv(args.param or []))
    except InvalidInputError as exc:
        raise UsageError(str(exc)) from exc
    return raw


def _summary(est) -> str:
    vals = est.eigenvalues_or_objective
    label = "objective" if est.method in ("lad", "mave", "cve", "kdr", "ukdr") else "eigenvalues"
    text = "n/a" if vals is None else ",".join(f"{v:.6g}" for v in list(vals)[:5])
    return f"{est.method} p={est.p} {label}={text}"


def cmd_fit(args) -> int:
    raw = _gather_params(args)
    params = method_params(args.method, raw, args.slices)
    data = read_csv(args.input, args.target, categorical=args.categorical)
    if args.dim > data.d:
        raise UsageError(f"--dim {args.dim} exceeds the number of covariates d={data.d}")
    est = fit_method(args.method, data, args.dim, seed=args.seed, **params)
    meta = {"seed": args.seed, "input": os.path.basename(args.input), "target": args.target}
    meta.update({k: v for k, v in raw.items()})
    if args.slices is not None:
        meta["h"] = args.slices
    for key in ("bandwidth", "objective", "start", "c"):
        if key in est.diagnostics and key not in meta:
            meta[key] = est.diagnostics[key]
    BasisFile(est.U, args.method, meta).write(args.output)
    for w in est.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(_summary(est))
    return 0


def cmd_simulate(args) -> int:
    try:
        model = GeneratorModel(args.model, d=args.d, n=args.n, noise_sigma=args.noise,
                               seed=args.seed, covariance=args.covariance)
    except InvalidInputError as exc:
        raise UsageError(str(exc)) from exc
    data, U = generate(model)
    write_csv(args.output, data)
    BasisFile(U, "truth", {"model": args.model, "seed": args.seed, "n": args.n,
                           "noise": repr(args.noise)}).write(args.truth)
    print(f"wrote {args.output} (n={data.n}, d={data.d}) and {args.truth}")
    return 0


def cmd_eval(args) -> int:
    est = BasisFile.read(args.estimate)
    truth = BasisFile.read(args.truth)
    if est.d != truth.d:
        raise InvalidInputError(f"dimension mismatch: estimate d={est.d}, truth d={truth.d}")
    ang, pf = subspace_error(est.basis, truth.basis)
    print(f"{ang:.6f} {pf:.6f}")
    return 0


def cmd_bench(args) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    unknown = [m for m in methods if m not in METHODS]
    if not methods or unknown:
        raise UsageError(f"unknown method(s): {', '.join(unknown) or '(none given)'}")
    raw = _gather_params(args)
    params, ignored = {}, []
    for m in methods:
        params[m] = method_params(m, raw, args.slices, ignored)
    unused = [k for k in raw if ignored.count(k) == len(methods)]
    if unused:
        raise UsageError(f"parameter(s) {', '.join(unused)} not understood by any listed method")
    try:
        model = GeneratorModel(args.model, d=args.d, n=args.n, noise_sigma=args.noise,
                               covariance=args.covariance)
    except InvalidInputError as exc:
        raise UsageError(str(exc)) from exc
    report = run_benchmark(methods, model, args.replicates, base_seed=args.seed, p=args.dim,
                           jobs=args.jobs, params=params)
    with open(args.output, "w", encoding="utf-8") as fh:
        fh.write(report.to_csv())
    for m, med in report.medians().items():
        print(f"{m} median max_angle {med:.6f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sdrkit", description="Sufficient dimension reduction toolkit.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def knobs(p):
        p.add_argument("--param", action="append", metavar="KEY=VALUE",
                       help="method knob, repeatable (h, c, bandwidth, epsilon, max_iter, ...)")
        p.add_argument("--config", help="file of key=value lines; --param overrides it")
        p.add_argument("--slices", type=_positive_int, help="number of slices h")
        p.add_argument("--seed", type=int, default=0)

    f = sub.add_parser("fit", help="estimate a basis from CSV data")
    f.add_argument("--method", required=True, choices=sorted(METHODS))
    f.add_argument("--input", required=True)
    f.add_argument("--target", required=True)
    f.add_argument("--dim", type=_positive_int, default=1)
    f.add_argument("--output", required=True)
    f.add_argument("--categorical", action="store_true", help="treat the target as class labels")
    knobs(f)
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("simulate", help="write a synthetic data set and its true basis")
    s.add_argument("--model", required=True, choices=sorted(MODELS))
    s.add_argument("--n", type=_positive_int, default=1000)
    s.add_argument("--d", type=_positive_int, default=10)
    s.add_argument("--noise", type=float, default=0.1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--covariance", choices=("identity", "correlated"), default="identity")
    s.add_argument("--output", default="data.csv")
    s.add_argument("--truth", default="truth.json")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("eval", help="compare an estimated basis with the truth")
    e.add_argument("estimate")
    e.add_argument("truth")
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("bench", help="Monte Carlo comparison of methods")
    b.add_argument("--methods", required=True, help="comma-separated method names")
    b.add_argument("--model", required=True, choices=sorted(MODELS))
    b.add_argument("--replicates", type=_nonneg_int, default=20)
    b.add_argument("--n", type=_positive_int, default=1000)
    b.add_argument("--d", type=_positive_int, default=10)
    b.add_argument("--noise", type=float, default=0.1)
    b.add_argument("--dim", type=_positive_int, default=None)
    b.add_argument("--covariance", choices=("identity", "correlated"), default="identity")
    b.add_argument("--jobs", type=_positive_int, default=os.cpu_count() or 1)
    b.add_argument("--output", default="bench.csv")
    knobs(b)
    b.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    stage = args.command
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"sdrkit {stage}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"sdrkit {stage}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"sdrkit {stage}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"sdrkit {stage}: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
