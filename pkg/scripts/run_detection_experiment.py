#!/usr/bin/env python3
"""End-to-end detection study: build a corpus, calibrate, evaluate.

Writes the standard evaluation outputs (metrics.csv, aggregate.csv,
manifest.json, histograms) into --out-dir and prints the aggregates, the
calibrated parameters, and the wall-clock cost per phase.
"""

import argparse
import os
import time

from patchblock.attacksim import PatchSpec
from patchblock.defense import DefenseConfig
from patchblock.harness import calibrate, evaluate
from patchblock.synth import write_corpus


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", required=True)
    parser.add_argument("--count", type=int, default=50)
    parser.add_argument("--rho", type=float, default=0.6)
    parser.add_argument("--sizes", default="38,41,44,47,50")
    parser.add_argument("--kind", default="uniform_noise")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    corpus = os.path.join(args.out_dir, "corpus")
    t0 = time.perf_counter()
    write_corpus(corpus, args.count, seed=args.seed, tile=8, low=0.2, high=0.8)
    t1 = time.perf_counter()

    params = calibrate(corpus, DefenseConfig(min_pts_fraction=args.rho))
    t2 = time.perf_counter()
    print(f"calibrated: eps={params.eps:g} min_pts={params.min_pts}")

    cfg = DefenseConfig(eps=params.eps, min_pts_fraction=args.rho)
    spec = PatchSpec(kind=args.kind, seed=args.seed + 1)
    sizes = [int(s) for s in args.sizes.split(",")]
    summary = evaluate(corpus, cfg, spec, args.out_dir, sizes=sizes)
    t3 = time.perf_counter()

    for key, value in summary.aggregates.items():
        print(f"{key}: {value:.4f}")
    for name, err in summary.errors:
        print(f"failed: {name}: {err}")
    print(
        f"timing: corpus {t1 - t0:.1f}s, calibrate {t2 - t1:.1f}s, "
        f"evaluate {t3 - t2:.1f}s"
    )
    print(f"outputs in {args.out_dir}")


if __name__ == "__main__":
    main()
