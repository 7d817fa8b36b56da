#!/usr/bin/env python3
"""Monte Carlo comparison of estimators across the synthetic models.

Prints a table of median max principal angles (radians) and median fit
times, and optionally writes every row to CSV.

    python3 scripts/compare_methods.py --replicates 10 --csv results.csv
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field

import numpy as np

from sdrkit.synthetic import MODELS, GeneratorModel, run_benchmark


@dataclass
class Experiment:
    models: list = field(default_factory=lambda: ["single_index_linear", "quadratic", "mean_plus_variance"])
    methods: list = field(default_factory=lambda: ["sir", "save", "dr", "pir", "cr", "pfc", "phd", "mave"])
    n: int = 2000
    d: int = 10
    noise: float = 0.1
    replicates: int = 10
    seed: int = 0
    jobs: int = 1


def run(exp: Experiment):
    reports = {}
    for name in exp.models:
        model = GeneratorModel(name, d=exp.d, n=exp.n, noise_sigma=exp.noise)
        reports[name] = run_benchmark(exp.methods, model, exp.replicates, base_seed=exp.seed, jobs=exp.jobs)
    return reports


def table(exp: Experiment, reports) -> str:
    width = max(len(m) for m in exp.models) + 2
    lines = ["method".ljust(10) + "".join(m.rjust(width) for m in exp.models)]
    for meth in exp.methods:
        cells = []
        for name in exp.models:
            rows = [r for r in reports[name].rows if r.method == meth]
            ang = np.median([r.max_angle for r in rows])
            sec = np.median([r.seconds for r in rows])
            cells.append(f"{ang:.3f} ({sec:.2f}s)".rjust(width))
        lines.append(meth.ljust(10) + "".join(cells))
    return "\n".join(lines)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--models", default=",".join(Experiment().models))
    ap.add_argument("--methods", default=",".join(Experiment().methods))
    ap.add_argument("--n", type=int, default=Experiment.n)
    ap.add_argument("--d", type=int, default=Experiment.d)
    ap.add_argument("--noise", type=float, default=Experiment.noise)
    ap.add_argument("--replicates", type=int, default=Experiment.replicates)
    ap.add_argument("--seed", type=int, default=Experiment.seed)
    ap.add_argument("--jobs", type=int, default=Experiment.jobs)
    ap.add_argument("--csv", help="write all rows here")
    a = ap.parse_args(argv)
    models = [m for m in a.models.split(",") if m]
    bad = [m for m in models if m not in MODELS]
    if bad:
        ap.error(f"unknown model(s): {', '.join(bad)}")
    exp = Experiment(models, [m for m in a.methods.split(",") if m], a.n, a.d, a.noise,
                     a.replicates, a.seed, a.jobs)
    reports = run(exp)
    print(f"median max angle (median seconds); n={exp.n}, d={exp.d}, sigma={exp.noise}, "
          f"{exp.replicates} replicates")
    print(table(exp, reports))
    if a.csv:
        with open(a.csv, "w", encoding="utf-8") as fh:
            body = [reports[m].to_csv().splitlines() for m in exp.models]
            fh.write("\n".join([body[0][0]] + [ln for b in body for ln in b[1:]]) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
