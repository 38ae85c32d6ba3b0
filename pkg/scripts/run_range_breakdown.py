"""AMOTA per distance bin for the baseline and the full tracker on the synthetic suite."""

import argparse
import os

from radarmot.experiments import ABLATION_ROWS, ABLATION_SCENE, ABLATION_SEEDS, EXPERIMENT_TRACKER, make_suite, track_suite
from radarmot.metrics import evaluate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=len(ABLATION_SEEDS))
    ap.add_argument("--workers", type=int, default=min(4, os.cpu_count() or 1))
    args = ap.parse_args()
    scenes = make_suite(ABLATION_SCENE, range(args.seeds))
    rows = dict(ABLATION_ROWS)
    reports = {}
    for name in ("baseline", "+cross-check"):
        outs = track_suite(scenes, EXPERIMENT_TRACKER.ablated(**rows[name]), args.workers)
        reports[name] = evaluate(list(zip(scenes, outs)), by_range=True)
    bins = list(reports["baseline"].by_range)
    print(f"{'range':<12}{'baseline':>10}{'full':>10}{'delta':>10}")
    for b in bins:
        a, f = reports["baseline"].by_range[b].amota, reports["+cross-check"].by_range[b].amota
        print(f"{b:<12}{100 * a:>10.1f}{100 * f:>10.1f}{100 * (f - a):>+10.1f}")


if __name__ == "__main__":
    main()
