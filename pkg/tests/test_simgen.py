from dataclasses import replace

import numpy as np
import pytest

from radarmot.errors import InvalidConfig
from radarmot.geom import Box3D, Pose, rot_z
from radarmot.radar_prep import aggregate_sweeps
from radarmot.scenario_io import write_scene
from radarmot.simgen import ScenarioConfig, generate

NOISELESS = ScenarioConfig(
    seed=4,
    duration_s=5.0,
    dropout_base=0.0,
    dropout_per_100m=0.0,
    det_sigma_pos=0.0,
    det_sigma_vel=0.0,
    det_sigma_size=0.0,
    det_sigma_yaw=0.0,
    false_det_rate=0.0,
    det_max_range=1e6,
    radar_sigma=0.0,
)


def test_noiseless_detections_equal_gt():
    scene = generate(NOISELESS)
    n = 0
    for fr in scene.frames:
        assert len(fr.detections) == len(fr.gt)
        for det, g in zip(fr.detections, fr.gt):
            assert det.cls == g.cls
            np.testing.assert_array_equal(det.box.center, g.box.center)
            np.testing.assert_array_equal(det.box.extents, g.box.extents)
            np.testing.assert_array_equal(det.box.velocity, g.box.velocity)
            assert det.box.yaw == g.box.yaw
            n += 1
    assert n > 0


def _scene_bytes(scene, tmp_path, name):
    p = tmp_path / name
    write_scene(p, scene)
    return p.read_bytes()


def test_same_seed_byte_identical(tmp_path):
    cfg = ScenarioConfig(seed=17, duration_s=4.0)
    assert _scene_bytes(generate(cfg), tmp_path, "a") == _scene_bytes(generate(cfg), tmp_path, "b")


def test_different_seeds_differ(tmp_path):
    a = _scene_bytes(generate(ScenarioConfig(seed=1, duration_s=4.0)), tmp_path, "a")
    b = _scene_bytes(generate(ScenarioConfig(seed=2, duration_s=4.0)), tmp_path, "b")
    assert a != b


def test_channel_streams_are_independent():
    # disabling radar must not change the detections drawn for the same seed
    cfg = ScenarioConfig(seed=9, duration_s=4.0)
    with_radar, without = generate(cfg), generate(replace(cfg, radar_enabled=False))
    for a, b in zip(with_radar.frames, without.frames):
        assert a.detections == b.detections
        assert b.radar is None


def test_dropout_rate_at_120m():
    cfg = ScenarioConfig(
        seed=21,
        duration_s=100.0,
        n_objects={"car": 1},
        spawn_x_range=(120.0, 120.0),
        rel_speed_range=(0.0, 0.0),
        oncoming_fraction=0.0,
        lanes_per_direction=1,
        dropout_base=0.26,
        dropout_per_100m=0.2,
        false_det_rate=0.0,
        radar_enabled=False,
    )
    scene = generate(cfg)
    assert len(scene.frames) == 200
    dist = [np.hypot(*(fr.gt[0].box.center[:2] - fr.ego.position[:2])) for fr in scene.frames]
    assert np.allclose(dist, dist[0]) and cfg.dropout(dist[0]) == pytest.approx(0.5, abs=1e-3)
    rate = np.mean([len(fr.detections) for fr in scene.frames])
    assert abs(rate - 0.5) <= 0.05


@pytest.mark.parametrize("ego_yaw_rate", [0.0, 0.08])
def test_radar_closed_loop(ego_yaw_rate):
    cfg = replace(NOISELESS, n_objects={"car": 1}, clutter_density=0.0, radar_points_base=20.0,
                  ego_yaw_rate=ego_yaw_rate, spawn_x_range=(20.0, 60.0))
    scene = generate(cfg)
    checked = 0
    for fr in scene.frames:
        cloud = aggregate_sweeps(fr.radar, r_exclude=0.0)
        if not len(cloud):
            continue
        v = fr.gt[0].box.velocity
        np.testing.assert_allclose(cloud.v_radial, cloud.los_xy @ v, atol=1e-9)
        # noise-free returns carry the full relative velocity, so compensation recovers it all
        np.testing.assert_allclose(cloud.v_comp, np.tile([v[0], v[1], 0.0], (len(cloud), 1)), atol=1e-9)
        checked += len(cloud)
    assert checked > 50


def test_clutter_is_near_static():
    cfg = replace(NOISELESS, n_objects={}, clutter_density=1e-3)
    scene = generate(cfg)
    v = np.concatenate([aggregate_sweeps(fr.radar, 0.0).v_radial for fr in scene.frames])
    assert len(v) > 100
    assert np.std(v) == pytest.approx(cfg.clutter_sigma_v, rel=0.2)


def _footprint(box):
    half = box.extents[:2] / 2
    corners = np.array([[1, 1], [1, -1], [-1, -1], [-1, 1]]) * half
    return corners @ rot_z(box.yaw)[:2, :2].T + box.center[:2]


def _overlap(a, b):
    """Separating-axis test for two convex quadrilaterals."""
    for poly in (a, b):
        for i in range(4):
            edge = poly[(i + 1) % 4] - poly[i]
            axis = np.array([-edge[1], edge[0]])
            pa, pb = a @ axis, b @ axis
            if pa.max() <= pb.min() or pb.max() <= pa.min():
                return False
    return True


@pytest.mark.parametrize("seed", range(5))
def test_objects_never_overlap(seed):
    scene = generate(ScenarioConfig(seed=seed, n_objects={"car": 8, "truck": 4, "pedestrian": 2},
                                    radar_enabled=False))
    for fr in scene.frames:
        fps = [_footprint(g.box) for g in fr.gt]
        for i in range(len(fps)):
            for j in range(i + 1, len(fps)):
                assert not _overlap(fps[i], fps[j]), (fr.frame_id, fr.gt[i].instance_id, fr.gt[j].instance_id)


def test_overlap_helper():
    a = _footprint(Box3D([0, 0, 0], [4, 2, 1], 0.0))
    assert _overlap(a, _footprint(Box3D([3, 0, 0], [4, 2, 1], 0.5)))
    assert not _overlap(a, _footprint(Box3D([5, 0, 0], [4, 2, 1], 0.0)))


def test_keyframe_timing_and_ids():
    cfg = ScenarioConfig(seed=0, duration_s=3.0, keyframe_hz=2.0)
    scene = generate(cfg)
    assert [fr.t for fr in scene.frames] == [0.0, 0.5, 1.0, 1.5, 2.0, 2.5]
    assert len({fr.frame_id for fr in scene.frames}) == len(scene.frames)
    sweeps = scene.frames[2].radar.sweeps
    assert [s.t for s in sweeps] == pytest.approx([0.9, 0.95, 1.0])
    assert scene.scene_id == "sim-0"
    assert isinstance(next(iter(scene.extrinsics.values())), Pose)


@pytest.mark.parametrize("bad", [
    dict(dropout_base=1.5),
    dict(det_sigma_pos=-1.0),
    dict(keyframe_hz=0.0),
    dict(n_objects={"spaceship": 1}),
    dict(sweeps_per_keyframe=20, sweep_interval_s=0.05),
])
def test_invalid_config(bad):
    with pytest.raises(InvalidConfig):
        ScenarioConfig(**bad)
