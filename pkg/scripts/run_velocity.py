"""Tracked-velocity RMSE with and without the radar Doppler update."""

import argparse

from radarmot.experiments import ABLATION_SEEDS, VELOCITY_SCENE, make_suite, velocity_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=len(ABLATION_SEEDS))
    args = ap.parse_args()
    on, off = velocity_experiment(make_suite(VELOCITY_SCENE, range(args.seeds)))
    print(f"velocity RMSE  radar KF on: {on:.4f} m/s  off: {off:.4f} m/s  reduction: {1 - on / off:.1%}")


if __name__ == "__main__":
    main()
