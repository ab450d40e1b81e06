#!/usr/bin/env python3
"""Render one elevated sample next to both single-model baselines.

Writes latents, traces, per-frame images, metrics.csv, and manifest.json
into the output directory (default ./demo_out), then prints the metric
table. Useful for eyeballing what the two-phase sampler actually does.
"""
import argparse
import json
from pathlib import Path

from latent_elevator.harness import run


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--output", default="demo_out")
    args = parser.parse_args()

    base = {"seeds": [args.seed]}
    rows = {}
    for mode in ("elevate", "baseline_t2v", "baseline_t2i"):
        config = dict(base, mode=mode)
        manifest = run(config, output_dir=Path(args.output) / mode)
        rows[mode] = manifest["aggregate"][mode]

    metrics = sorted(next(iter(rows.values())))
    header = ["mode"] + metrics
    print("\t".join(header))
    for mode, stats in rows.items():
        print("\t".join([mode] + [f"{stats[m]:.4f}" for m in metrics]))
    print(f"\nartifacts under {args.output}/")


if __name__ == "__main__":
    main()
