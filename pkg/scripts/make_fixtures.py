"""Regenerate the generated parts of tests/fixtures.

Hand-written fixtures (valid/minimal_scene.jsonl and everything in malformed/)
are left alone. Run from the repository root:

    python3 scripts/make_fixtures.py
"""

from __future__ import annotations

import tempfile
from dataclasses import replace
from pathlib import Path

from radarmot.cli import main as cli
from radarmot.radar_prep import aggregate_sweeps
from radarmot.scenario_io import write_results, write_scene
from radarmot.simgen import ScenarioConfig, generate
from radarmot.tracker import TrackerConfig, run_scene

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

GOLDEN_SEED = 7
GOLDEN_CONFIG = """\
# small pipeline run frozen as the golden report
sim.duration_s = 10.0
assoc.delta_v = 3.0
"""


def write_valid(out: Path) -> None:
    scene = generate(ScenarioConfig(seed=5, duration_s=3.0, n_objects={"car": 3, "pedestrian": 1},
                                    clutter_density=2e-4))
    write_scene(out / "sim_sweeps.jsonl", scene)

    cfg = TrackerConfig()
    clouds = replace(scene, scene_id="sim-5-clouds",
                     frames=[replace(fr, radar=aggregate_sweeps(fr.radar, cfg.r_exclude)) for fr in scene.frames[:2]])
    write_scene(out / "radar_points.jsonl", clouds)

    write_results(out / "results.jsonl", run_scene(scene, cfg), scene_id=scene.scene_id)
    write_results(out / "empty_results.jsonl", [])


def write_golden(out: Path) -> None:
    cfg = out / "run.cfg"
    cfg.write_text(GOLDEN_CONFIG, encoding="utf-8")
    with tempfile.TemporaryDirectory() as tmp:
        scene, results = Path(tmp) / "scene.jsonl", Path(tmp) / "results.jsonl"
        steps = [
            ["simulate", "--config", str(cfg), "--seed", str(GOLDEN_SEED), "--out", str(scene)],
            ["track", "--config", str(cfg), "--scene", str(scene), "--out", str(results)],
            ["eval", "--config", str(cfg), "--scene", str(scene), "--results", str(results),
             "--by-range", "--by-condition", "--out", str(out / "report.json")],
        ]
        for argv in steps:
            if cli(argv) != 0:
                raise SystemExit(f"pipeline step failed: {argv[0]}")


if __name__ == "__main__":
    (FIXTURES / "valid").mkdir(parents=True, exist_ok=True)
    (FIXTURES / "golden").mkdir(parents=True, exist_ok=True)
    write_valid(FIXTURES / "valid")
    write_golden(FIXTURES / "golden")
    print(f"fixtures written under {FIXTURES}")
