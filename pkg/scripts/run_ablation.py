"""Component ablation on the seeded synthetic suite; prints one row per configuration."""

import argparse
import os

from radarmot.experiments import ABLATION_SCENE, ABLATION_SEEDS, format_ablation, make_suite, run_ablation


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=len(ABLATION_SEEDS), help="number of scenes, seeds 0..n-1")
    ap.add_argument("--workers", type=int, default=min(4, os.cpu_count() or 1))
    args = ap.parse_args()
    scenes = make_suite(ABLATION_SCENE, range(args.seeds))
    print(format_ablation(run_ablation(scenes, workers=args.workers)))


if __name__ == "__main__":
    main()
