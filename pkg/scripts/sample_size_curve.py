#!/usr/bin/env python3
"""Estimation error against sample size for a few estimators.

SIR's error on the linear model shrinks roughly like n^(-1/2); on the
quadratic model it stays near pi/2 however large n gets, while SAVE and
DR keep improving.

    python3 scripts/sample_size_curve.py --model quadratic --methods sir,save,dr
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field

import numpy as np

from sdrkit.synthetic import GeneratorModel, run_benchmark


@dataclass
class Curve:
    model: str = "single_index_linear"
    methods: list = field(default_factory=lambda: ["sir", "save", "dr"])
    sizes: list = field(default_factory=lambda: [250, 500, 1000, 2000, 4000, 8000])
    d: int = 10
    noise: float = 0.1
    replicates: int = 10
    seed: int = 0


def run(c: Curve) -> dict:
    out = {m: [] for m in c.methods}
    for n in c.sizes:
        rep = run_benchmark(c.methods, GeneratorModel(c.model, d=c.d, n=n, noise_sigma=c.noise),
                            c.replicates, base_seed=c.seed)
        for m, med in rep.medians().items():
            out[m].append(med)
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--model", default=Curve.model)
    ap.add_argument("--methods", default="sir,save,dr")
    ap.add_argument("--sizes", default="250,500,1000,2000,4000,8000")
    ap.add_argument("--d", type=int, default=Curve.d)
    ap.add_argument("--noise", type=float, default=Curve.noise)
    ap.add_argument("--replicates", type=int, default=Curve.replicates)
    ap.add_argument("--seed", type=int, default=Curve.seed)
    a = ap.parse_args(argv)
    c = Curve(a.model, a.methods.split(","), [int(s) for s in a.sizes.split(",")],
              a.d, a.noise, a.replicates, a.seed)
    res = run(c)
    print("n".rjust(7) + "".join(m.rjust(10) for m in c.methods))
    for i, n in enumerate(c.sizes):
        print(f"{n:7d}" + "".join(f"{res[m][i]:10.4f}" for m in c.methods))
    # log-log slope of the median error, a rough rate estimate
    logn = np.log(c.sizes)
    for m in c.methods:
        slope = np.polyfit(logn, np.log(np.maximum(res[m], 1e-12)), 1)[0]
        print(f"{m}: slope {slope:+.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
