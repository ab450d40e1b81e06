#!/usr/bin/env python3
"""Run the three ablation studies and print their ordering checks.

Covers the low-pass-filter variants, the inversion strategies, and the
step-count comparison, each over a seed range, with --check so the exit
status reflects whether the expected orderings hold.
"""
import argparse
import sys
from pathlib import Path

from latent_elevator.cli import parse_seeds
from latent_elevator.harness import run


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", default="0:20")
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--output", default="ablation_out")
    args = parser.parse_args()

    seeds = parse_seeds(args.seeds)
    failures = []
    for mode in ("ablate_filter", "ablate_inversion", "ablate_steps"):
        config = {"mode": mode, "seeds": seeds, "jobs": args.jobs,
                  "check": True, "render": False}
        manifest = run(config, output_dir=Path(args.output) / mode)
        print(f"== {mode}")
        for variant, stats in manifest["aggregate"].items():
            summary = ", ".join(f"{k}={v:.4f}" for k, v in sorted(stats.items()))
            print(f"  {variant}: {summary}")
        checks = manifest["checks"]
        if checks["passed"]:
            print("  checks: all passed")
        else:
            for f in checks["failures"]:
                print(f"  CHECK FAILED: {f}")
            failures.extend(checks["failures"])
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
