import json
from pathlib import Path

import numpy as np
import pytest

from radarmot import errors
from radarmot.assoc import AssocConfig
from radarmot.errors import InvalidConfig, IoError, NonMonotonicTime, SchemaMismatch, VersionUnsupported
from radarmot.metrics import evaluate
from radarmot.radar_prep import RadarCloud, SweepBundle
from radarmot.scenario_io import (
    RunConfig,
    format_report,
    load_config,
    parse_config_text,
    parse_results,
    parse_scene,
    read_report,
    report_text_path,
    write_report,
    write_results,
    write_scene,
)

from conftest import FIXTURES, outputs_from_gt, random_gt_scene

VALID = FIXTURES / "valid"
MALFORMED = FIXTURES / "malformed"
EXPECTED = json.loads((MALFORMED / "expected.json").read_text())

# files written by the library itself; reading and writing them must give the same bytes
CANONICAL_SCENES = ["sim_sweeps.jsonl", "radar_points.jsonl"]
CANONICAL_RESULTS = ["results.jsonl", "empty_results.jsonl"]


@pytest.mark.parametrize("name", CANONICAL_SCENES)
def test_scene_round_trip_is_byte_identical(name, tmp_path):
    src = VALID / name
    write_scene(tmp_path / name, parse_scene(src))
    assert (tmp_path / name).read_bytes() == src.read_bytes()


@pytest.mark.parametrize("name", CANONICAL_RESULTS)
def test_results_round_trip_is_byte_identical(name, tmp_path):
    src = VALID / name
    header = json.loads(src.read_text().splitlines()[0])
    write_results(tmp_path / name, parse_results(src), scene_id=header.get("scene_id"))
    assert (tmp_path / name).read_bytes() == src.read_bytes()


def test_report_round_trip_is_byte_identical(tmp_path):
    src = FIXTURES / "golden" / "report.json"
    write_report(tmp_path / "report.json", read_report(src))
    assert (tmp_path / "report.json").read_bytes() == src.read_bytes()
    assert (tmp_path / "report.txt").read_bytes() == report_text_path(src).read_bytes()


def test_hand_written_scene_normalizes_to_a_fixed_point(tmp_path):
    scene = parse_scene(VALID / "minimal_scene.jsonl")
    assert scene.scene_id == "minimal" and len(scene.frames) == 1
    fr = scene.frames[0]
    assert fr.detections == [] and fr.radar is None and fr.gt is None
    np.testing.assert_array_equal(fr.ego.v_ego, 0.0)
    write_scene(tmp_path / "a.jsonl", scene)
    write_scene(tmp_path / "b.jsonl", parse_scene(tmp_path / "a.jsonl"))
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()


def test_sweep_and_cloud_variants_parse_to_their_types():
    sweeps = parse_scene(VALID / "sim_sweeps.jsonl")
    clouds = parse_scene(VALID / "radar_points.jsonl")
    assert all(isinstance(fr.radar, SweepBundle) for fr in sweeps.frames)
    assert all(isinstance(fr.radar, RadarCloud) for fr in clouds.frames)
    assert sweeps.extrinsics and set(sweeps.extrinsics) == set(clouds.extrinsics)
    assert any(fr.gt for fr in sweeps.frames)


def test_random_scene_round_trip_preserves_values(tmp_path):
    rng = np.random.default_rng(3)
    scene = random_gt_scene(rng, "rt", n_frames=6)
    scene.conditions = {"weather": "fog"}
    write_scene(tmp_path / "s.jsonl", scene)
    back = parse_scene(tmp_path / "s.jsonl")
    assert back.conditions == {"weather": "fog"}
    assert [f.frame_id for f in back.frames] == [f.frame_id for f in scene.frames]
    assert [f.t for f in back.frames] == [f.t for f in scene.frames]
    for a, b in zip(scene.frames, back.frames):
        assert a.gt == b.gt
        np.testing.assert_array_equal(a.ego.pose.translation, b.ego.pose.translation)

    out = outputs_from_gt(scene, score=0.75)
    write_results(tmp_path / "r.jsonl", out)
    assert parse_results(tmp_path / "r.jsonl") == out


@pytest.mark.parametrize("name", sorted(EXPECTED))
def test_malformed_fixture_raises_documented_error(name):
    want = EXPECTED[name]
    parse = parse_results if name.startswith("results") else parse_scene
    with pytest.raises(getattr(errors, want["error"])) as info:
        parse(MALFORMED / name)
    assert info.value.line == want["line"]
    assert f"line {want['line']}" in str(info.value)


def test_every_malformed_fixture_is_listed():
    on_disk = {p.name for p in MALFORMED.glob("*.jsonl")}
    assert on_disk == set(EXPECTED)


def test_version_99_and_time_reversal_examples():
    with pytest.raises(VersionUnsupported):
        parse_scene(MALFORMED / "version99.jsonl")
    with pytest.raises(NonMonotonicTime) as info:
        parse_scene(MALFORMED / "nonmonotonic_time.jsonl")
    assert info.value.line == 3


def test_missing_file_is_io_error(tmp_path):
    with pytest.raises(IoError) as info:
        parse_scene(tmp_path / "absent.jsonl")
    assert isinstance(info.value, OSError)


def test_blank_lines_are_skipped_but_counted(tmp_path):
    lines = (VALID / "minimal_scene.jsonl").read_text().splitlines()
    p = tmp_path / "gappy.jsonl"
    p.write_text("\n".join([lines[0], "", lines[1], "", '{"type": "frame"}']) + "\n")
    with pytest.raises(SchemaMismatch) as info:
        parse_scene(p)
    assert info.value.line == 5


def test_empty_results_file_is_header_only():
    text = (VALID / "empty_results.jsonl").read_text()
    assert len(text.splitlines()) == 1
    assert parse_results(VALID / "empty_results.jsonl") == []


def test_perfect_report_shows_full_score(tmp_path):
    rng = np.random.default_rng(4)
    scene = random_gt_scene(rng, n_frames=6)
    while not any(fr.gt for fr in scene.frames):
        scene = random_gt_scene(rng, n_frames=6)
    rep = evaluate([(scene, outputs_from_gt(scene))])
    text = format_report(rep)
    overall = next(line for line in text.splitlines() if line.startswith("Overall"))
    assert overall.split()[1] == "100.0"
    write_report(tmp_path / "r.json", rep)
    assert (tmp_path / "r.txt").read_text() == text
    assert read_report(tmp_path / "r.json").amota == 1.0


class TestConfig:
    def test_defaults(self):
        assert load_config(None) == RunConfig()
        assert parse_config_text("") == RunConfig()

    def test_sections_and_comments(self):
        cfg = parse_config_text("""
            # comment line
            assoc.delta_v = 3.0   # trailing comment
            lifecycle.max_misses_confirmed = 2
            radar.radar_kf = false
            eval.n_recall = 11
            sim.duration_s = 4
            sim.n_objects.car = 5
        """)
        assert cfg.tracker.assoc == AssocConfig(delta_v=3.0)
        assert cfg.tracker.lifecycle.max_misses_confirmed == 2
        assert cfg.tracker.radar_kf is False
        assert cfg.eval.n_recall == 11
        assert cfg.sim.duration_s == 4.0 and isinstance(cfg.sim.duration_s, float)
        assert cfg.sim.n_objects["car"] == 5

    @pytest.mark.parametrize("raw,expected", [("true", True), ("no", False), ("1", True), ("False", False)])
    def test_bool_coercion(self, raw, expected):
        assert parse_config_text(f"tracker.cross_check = {raw}").tracker.cross_check is expected

    @pytest.mark.parametrize("text", [
        "assoc.no_such_key = 1",
        "nosection.delta_v = 1",
        "assoc = 1",
        "assoc.delta_v",
        "lifecycle.confirm_hits = 1.5",
        "tracker.cross_check = maybe",
        "lifecycle.confirm_hits = 0",
        "tracker.assoc = 3",
    ])
    def test_rejected(self, text):
        with pytest.raises(InvalidConfig):
            parse_config_text(text)

    def test_golden_config_file(self):
        cfg = load_config(FIXTURES / "golden" / "run.cfg")
        assert cfg.sim.duration_s == 10.0 and cfg.tracker.assoc.delta_v == 3.0

    def test_missing_config_file(self, tmp_path):
        with pytest.raises(IoError):
            load_config(tmp_path / "nope.cfg")


def test_fixture_paths_exist():
    assert isinstance(FIXTURES, Path)
    for name in CANONICAL_SCENES + CANONICAL_RESULTS + ["minimal_scene.jsonl"]:
        assert (VALID / name).is_file()


def test_results_for_another_scene_rejected():
    path = VALID / "results.jsonl"
    assert parse_results(path, expect_scene_id="sim-5")
    with pytest.raises(SchemaMismatch) as info:
        parse_results(path, expect_scene_id="sim-6")
    assert info.value.line == 1
    # files without a scene id in the header are accepted for any scene
    assert parse_results(VALID / "empty_results.jsonl", expect_scene_id="anything") == []
