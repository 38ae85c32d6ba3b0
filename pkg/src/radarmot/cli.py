"""Command-line entry point: simulate, track, eval, plot.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .errors import DataError, RadarMotError
from .metrics import evaluate
from .scenario_io import (
    load_config,
    parse_results,
    parse_scene,
    read_report,
    write_report,
    write_results,
    write_scene,
)
from .simgen import generate
from .tracker import run_scene

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="radarmot", description="Radar-assisted 3D multi-object tracking")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="generate a synthetic scene file")
    s.add_argument("--config", help="key=value config file (sim.* keys)")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True)

    t = sub.add_parser("track", help="run the tracker over a scene file")
    t.add_argument("--scene", required=True)
    t.add_argument("--config")
    t.add_argument("--out", required=True)
    t.add_argument("--no-radar-kf", action="store_true", help="disable radar velocity updates")
    t.add_argument("--no-radar-assoc", action="store_true", help="disable radar recovery of unmatched tracks")
    t.add_argument("--no-cross-check", action="store_true", help="use the forward-only association cost")

    e = sub.add_parser("eval", help="score results against scene ground truth")
    e.add_argument("--scene", required=True, action="append", help="repeatable; paired with --results in order")
    e.add_argument("--results", required=True, action="append")
    e.add_argument("--config")
    e.add_argument("--out", required=True, help="JSON report path; tables are written next to it as .txt")
    e.add_argument("--by-range", action="store_true")
    e.add_argument("--by-condition", action="store_true")

    pl = sub.add_parser("plot", help="emit figure data and a PNG from a report")
    pl.add_argument("--report", required=True)
    pl.add_argument("--out", required=True, help="output directory")
    return p


def _simulate(args) -> None:
    cfg = load_config(args.config)
    write_scene(args.out, generate(replace(cfg.sim, seed=args.seed)))


def _track(args) -> None:
    cfg = load_config(args.config).tracker
    flags = {}
    if args.no_radar_kf:
        flags["radar_kf"] = False
    if args.no_radar_assoc:
        flags["radar_assoc"] = False
    if args.no_cross_check:
        flags["cross_check"] = False
    cfg = cfg.ablated(**flags)
    scene = parse_scene(args.scene)
    write_results(args.out, run_scene(scene, cfg), scene_id=scene.scene_id)


def _eval(args) -> None:
    if len(args.scene) != len(args.results):
        raise _UsageError("--scene and --results must be given the same number of times")
    cfg = load_config(args.config).eval
    runs = []
    for s, r in zip(args.scene, args.results):
        scene = parse_scene(s)
        runs.append((scene, parse_results(r, expect_scene_id=scene.scene_id)))
    report = evaluate(runs, cfg, by_range=args.by_range, by_condition=args.by_condition)
    write_report(args.out, report)


def _plot(args) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    report = read_report(args.report)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    panels = [("range", report.by_range), ("condition", report.by_condition)]
    data = {name: {k: g.amota for k, g in groups.items()} for name, groups in panels}
    data["overall"] = report.amota
    (out / "amota_groups.json").write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")
    with open(out / "amota_groups.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["group", "label", "amota", "ids", "positives"])
        for name, groups in panels:
            for label, g in groups.items():
                w.writerow([name, label, f"{g.amota:.6f}", g.ids, g.positives])

    shown = [(n, g) for n, g in panels if g]
    if not shown:
        shown = [("overall", {"all": None})]
    fig, axes = plt.subplots(1, len(shown), figsize=(5 * len(shown), 3.5), squeeze=False)
    for ax, (name, groups) in zip(axes[0], shown):
        labels = list(groups)
        vals = [100 * (g.amota if g is not None else report.amota) for g in groups.values()]
        ax.bar(labels, vals, color="#4c72b0")
        ax.set_ylabel("AMOTA [%]")
        ax.set_title(f"AMOTA by {name}")
        ax.set_ylim(0, 100)
        ax.tick_params(axis="x", rotation=30)
    fig.tight_layout()
    fig.savefig(out / "amota_groups.png", dpi=100, metadata={"Software": None})
    plt.close(fig)


_COMMANDS = {"simulate": _simulate, "track": _track, "eval": _eval, "plot": _plot}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError:
        return EXIT_USAGE
    except SystemExit as e:  # --help
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        _COMMANDS[args.command](args)
    except _UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"radarmot: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as e:
        print(f"radarmot: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except RadarMotError as e:
        # invalid config values and similar input problems
        print(f"radarmot: error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
