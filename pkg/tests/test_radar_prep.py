import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from radarmot.errors import EmptyBundle, InvalidConfig
from radarmot.geom import Pose, rot_z
from radarmot.radar_prep import (
    EgoState,
    RadarCloud,
    RadarPoint,
    Sweep,
    SweepBundle,
    aggregate_sweeps,
    compensate_ego,
    compensate_position,
    interpolate_ego,
    radial_spread,
)

FRONT = {"front": Pose.identity()}


def _point(p_sensor=(100, 0, 0), v_rel=(0, 0, 0), t=0.0, pose=None):
    return RadarPoint.from_raw(p_sensor, v_rel, t, "front", pose or Pose.identity())


class TestCompensateEgo:
    def test_pure_translation_cancels(self):
        pt = _point(v_rel=(-5, 0, 0))
        v = compensate_ego(pt, EgoState(v_ego=[5, 0, 0]))
        np.testing.assert_array_equal(v, [0, 0, 0])
        assert pt.v_radial == 0.0

    def test_rotation_term(self):
        # point at r = (0, 10, 0) in the ego frame; omega x r = (-1, 0, 0)
        pt = _point(p_sensor=(0, 10, 0), v_rel=(1, 0, 0))
        v = compensate_ego(pt, EgoState(omega_ego=[0, 0, 0.1]))
        np.testing.assert_allclose(v, [0, 0, 0], atol=1e-15)

    def test_co_moving_target(self):
        pt = _point(v_rel=(0, 0, 0))
        v = compensate_ego(pt, EgoState(v_ego=[2, 0, 0]))
        np.testing.assert_array_equal(v, [2, 0, 0])
        assert pt.v_radial == pytest.approx(2.0)

    def test_rotation_center_offset(self):
        # a rear-axle rotation center 2 m behind the origin lengthens the lever arm
        pt = _point(p_sensor=(8, 0, 0), v_rel=(0, 0, 0))
        v = compensate_ego(pt, EgoState(omega_ego=[0, 0, 0.5], rotation_center=[-2, 0, 0]))
        np.testing.assert_allclose(v, [0, 5.0, 0], atol=1e-15)

    @given(st.tuples(*[st.floats(-30, 30)] * 3), st.tuples(*[st.floats(-100, 100)] * 3).filter(
        lambda p: np.linalg.norm(p) > 1.0))
    def test_zero_ego_motion_is_identity(self, v_rel, p):
        pt = _point(p_sensor=p, v_rel=v_rel)
        np.testing.assert_array_equal(compensate_ego(pt, EgoState()), np.asarray(v_rel, dtype=float))

    def test_radial_consistency_with_rotated_sensor(self):
        sensor = Pose.from_yaw(0.7, (1, 2, 0.5))
        ego = EgoState(Pose.from_yaw(-0.2, (10, 5, 0)), [12, 0.5, 0], [0, 0, 0.05])
        pt = RadarPoint.from_raw([30, 4, 1], [-3, 1, 0.2], 0.0, "s", ego.pose @ sensor)
        v = compensate_ego(pt, ego)
        assert pt.v_radial == pytest.approx(pt.bearing @ (pt.rot_global_to_sensor @ v), abs=1e-9)


class TestCompensatePosition:
    def test_static_point(self):
        pt = _point()
        pt.v_radial = 0.0
        np.testing.assert_array_equal(compensate_position(pt, 5.0), pt.p_global)

    def test_forward(self):
        pt = _point(p_sensor=(100, 0, 0), t=-0.05)
        pt.v_radial = 10.0
        np.testing.assert_allclose(compensate_position(pt, 0.0), [100.5, 0, 0])

    def test_receding_negative(self):
        pt = _point(p_sensor=(0, 50, 0), t=-0.25)
        pt.v_radial = -4.0
        np.testing.assert_allclose(compensate_position(pt, 0.0), [0, 49, 0])

    def test_uses_global_bearing(self):
        # sensor yawed 90 deg: sensor +x is global +y
        pt = RadarPoint.from_raw([20, 0, 0], [0, 0, 0], -0.5, "s", Pose.from_yaw(math.pi / 2))
        pt.v_radial = 2.0
        np.testing.assert_allclose(compensate_position(pt, 0.0), [0, 21, 0], atol=1e-12)


def _bundle(sweeps, t_k=0.0, ego=None):
    return SweepBundle(sweeps, t_k, FRONT, keyframe_ego=ego or EgoState())


class TestAggregate:
    def test_static_single_sweep(self):
        cloud = aggregate_sweeps(_bundle([Sweep(0.0, EgoState(), ["front"], [[100, 0, 0]], [[0, 0, 0]])]))
        assert len(cloud) == 1
        np.testing.assert_array_equal(cloud.p_global[0], [100, 0, 0])
        assert cloud.v_radial[0] == 0.0

    def test_near_ego_dropped(self):
        sw = Sweep(0.0, EgoState(), ["front", "front"], [[10, 0, 0], [16, 0, 0]], np.zeros((2, 3)))
        cloud = aggregate_sweeps(_bundle([sw]), r_exclude=15.0)
        assert len(cloud) == 1
        assert cloud.p_global[0, 0] == 16.0

    def test_two_sweeps_collapse(self):
        # target on the sensor x axis receding at 10 m/s, seen 0.05 s before and at the keyframe
        sweeps = [
            Sweep(-0.05, EgoState(), ["front"], [[99.5, 0, 0]], [[10, 0, 0]]),
            Sweep(0.0, EgoState(), ["front"], [[100.0, 0, 0]], [[10, 0, 0]]),
        ]
        cloud = aggregate_sweeps(_bundle(sweeps))
        assert abs(sweeps[1].p_sensor[0, 0] - sweeps[0].p_sensor[0, 0]) == pytest.approx(0.5)
        np.testing.assert_allclose(cloud.p_global[0], cloud.p_global[1], atol=1e-9)

    def test_empty_bundle(self):
        with pytest.raises(EmptyBundle):
            aggregate_sweeps(_bundle([]))

    def test_unknown_sensor(self):
        with pytest.raises(InvalidConfig):
            aggregate_sweeps(_bundle([Sweep(0.0, EgoState(), ["rear"], [[50, 0, 0]], [[0, 0, 0]])]))

    def test_unsorted_sweeps_rejected(self):
        with pytest.raises(InvalidConfig):
            _bundle([Sweep(0.0, None, [], np.zeros((0, 3)), np.zeros((0, 3))),
                     Sweep(-0.1, None, [], np.zeros((0, 3)), np.zeros((0, 3)))])

    def test_sweep_after_keyframe_rejected(self):
        with pytest.raises(InvalidConfig):
            _bundle([Sweep(0.1, None, [], np.zeros((0, 3)), np.zeros((0, 3)))], t_k=0.0)

    def test_output_order(self):
        ext = {"a": Pose.identity(), "b": Pose.from_yaw(math.pi)}
        sweeps = [
            Sweep(-0.1, EgoState(), ["b", "a", "b"], [[40, 0, 0], [41, 0, 0], [42, 0, 0]], np.zeros((3, 3))),
            Sweep(0.0, EgoState(), ["a", "b"], [[43, 0, 0], [44, 0, 0]], np.zeros((2, 3))),
        ]
        cloud = aggregate_sweeps(SweepBundle(sweeps, 0.0, ext, keyframe_ego=EgoState()))
        assert list(cloud.t_sweep) == [-0.1, -0.1, -0.1, 0.0, 0.0]
        assert list(cloud.sensor_id) == ["a", "b", "b", "a", "b"]
        np.testing.assert_array_equal(np.abs(cloud.p_global[:, 0]), [41, 40, 42, 43, 44])

    def test_matches_pointwise_pipeline(self, rng):
        ext = {"front": Pose.from_yaw(0.1, (3.5, 0, 0.7)), "left": Pose.from_yaw(1.5, (1, 0.9, 0.7))}
        egos = [EgoState(Pose.from_yaw(0.05 * i, (i, 0.2 * i, 0)), [15, 0.3, 0], [0, 0, 0.08]) for i in range(3)]
        sweeps = []
        for i, t in enumerate((-0.1, -0.05, 0.0)):
            n = 6
            sweeps.append(Sweep(t, egos[i], rng.choice(["front", "left"], n),
                                rng.uniform([20, -20, -1], [80, 20, 1], (n, 3)), rng.normal(0, 5, (n, 3))))
        cloud = aggregate_sweeps(SweepBundle(sweeps, 0.0, ext, keyframe_ego=egos[-1]), r_exclude=0.0)
        expected = []
        for sw in sweeps:
            for sid, p, v in zip(sw.sensor_ids, sw.p_sensor, sw.v_rel):
                pt = RadarPoint.from_raw(p, v, sw.t, sid, sw.ego.pose @ ext[sid])
                compensate_ego(pt, sw.ego)
                expected.append((sw.t, sid, compensate_position(pt, 0.0), pt.v_radial, pt.v_comp))
        expected.sort(key=lambda e: (e[0], e[1]))
        for i, (t, sid, p, vr, vc) in enumerate(expected):
            assert cloud.t_sweep[i] == t and cloud.sensor_id[i] == sid
            np.testing.assert_allclose(cloud.p_global[i], p, atol=1e-9)
            assert cloud.v_radial[i] == pytest.approx(vr, abs=1e-9)
            np.testing.assert_allclose(cloud.v_comp[i], vc, atol=1e-9)

    @given(st.integers(0, 30), st.floats(0, 60))
    def test_never_adds_points(self, n, r_exclude):
        rng = np.random.default_rng(n)
        sw = Sweep(0.0, EgoState(), ["front"] * n, rng.uniform(-80, 80, (n, 3)) + [0, 0, 0.5], np.zeros((n, 3)))
        assert len(aggregate_sweeps(_bundle([sw]), r_exclude)) <= n

    def test_missing_sweep_ego_is_interpolated(self):
        e0 = EgoState(Pose.from_yaw(0.0, (0, 0, 0)), [10, 0, 0])
        e1 = EgoState(Pose.from_yaw(0.2, (5, 0, 0)), [10, 0, 0])
        sw = Sweep(0.25, None, ["front"], [[50, 0, 0]], [[0, 0, 0]])
        cloud = aggregate_sweeps(SweepBundle([sw], 0.5, FRONT, keyframe_ego=e1, prev_keyframe=(0.0, e0)))
        mid = interpolate_ego(e0, 0.0, e1, 0.5, 0.25)
        np.testing.assert_allclose(cloud.sensor_trans[0], [2.5, 0, 0])
        np.testing.assert_allclose(cloud.sensor_rot[0], mid.pose.rotation, atol=1e-12)
        assert Pose(cloud.sensor_rot[0]).yaw == pytest.approx(0.1)

    def test_missing_ego_without_prev_uses_keyframe(self):
        e1 = EgoState(Pose.from_yaw(0.2, (5, 0, 0)))
        sw = Sweep(0.25, None, ["front"], [[50, 0, 0]], [[0, 0, 0]])
        cloud = aggregate_sweeps(SweepBundle([sw], 0.5, FRONT, keyframe_ego=e1))
        np.testing.assert_allclose(cloud.sensor_trans[0], [5, 0, 0])


class TestCloud:
    def test_roundtrip_points(self):
        pts = [_point((50 + i, i, 0), (i, 0, 0)) for i in range(3)]
        cloud = RadarCloud.from_points(pts)
        assert len(cloud) == 3
        back = list(cloud)
        for a, b in zip(pts, back):
            np.testing.assert_array_equal(a.p_global, b.p_global)
            assert a.v_radial == b.v_radial

    def test_los_xy_is_global_bearing(self):
        pose = Pose.from_yaw(math.pi / 2)
        cloud = RadarCloud.from_points([RadarPoint.from_raw([3, 4, 0], [0, 0, 0], 0.0, "s", pose)])
        np.testing.assert_allclose(cloud.los_xy[0], [-0.8, 0.6], atol=1e-15)

    def test_empty(self):
        assert len(RadarCloud.empty()) == 0
        assert RadarCloud.from_points([]).equals(RadarCloud.empty())


# --- closed-loop properties -----------------------------------------------------------


def _turning_ego(t, speed, yaw_rate, p0=(0.0, 0.0)):
    """Exact constant-turn ego pose and body-frame rates at time t."""
    h = yaw_rate * t
    if abs(yaw_rate) < 1e-12:
        p = np.array([p0[0] + speed * t, p0[1], 0.0])
    else:
        k = speed / yaw_rate
        p = np.array([p0[0] + k * math.sin(h), p0[1] + 2 * k * math.sin(h / 2) ** 2, 0.0])
    return EgoState(Pose(rot_z(h), p), [speed, 0, 0], [0, 0, yaw_rate])


def _static_world_sweep(world_pts, t, speed, yaw_rate, ext, h=1e-5):
    """Relative velocities from finite differences of sensor-frame positions of fixed world points."""
    def in_sensor(tt):
        ego = _turning_ego(tt, speed, yaw_rate)
        return (ego.pose @ ext).inverse().apply(world_pts)

    p_s = in_sensor(t)
    # the rate of change of sensor-frame coordinates is the point's velocity
    # relative to the ego point it coincides with, in sensor axes
    v_rel = (in_sensor(t + h) - in_sensor(t - h)) / (2 * h)
    return _turning_ego(t, speed, yaw_rate), p_s, v_rel


@given(st.floats(0, 35), st.floats(-0.3, 0.3), st.integers(0, 2**31))
def test_static_world_cancels(speed, yaw_rate, seed):
    rng = np.random.default_rng(seed)
    ext = Pose.from_yaw(0.3, (3.0, 0.5, 0.8))
    world = rng.uniform([-100, -100, -1], [100, 100, 2], (20, 3))
    sweeps = []
    for t in (-0.1, -0.05, 0.0):
        ego, p_s, v_rel = _static_world_sweep(world, t, speed, yaw_rate, ext)
        sweeps.append(Sweep(t, ego, ["s"] * len(p_s), p_s, v_rel))
    cloud = aggregate_sweeps(SweepBundle(sweeps, 0.0, {"s": ext}, keyframe_ego=sweeps[-1].ego), r_exclude=0.0)
    assert np.max(np.linalg.norm(cloud.v_comp, axis=1)) < 1e-6


def test_radial_target_collapses():
    # ego drives along +x at 20 m/s; a target straight ahead recedes at 27 m/s
    ext = Pose.from_yaw(0.0, (4.0, 0.0, 0.8))
    sweeps, raw = [], []
    for t in (-0.15, -0.1, -0.05, 0.0):
        ego = _turning_ego(t, 20.0, 0.0)
        target = np.array([[80.0 + 27.0 * t, 0.0, 0.8]])
        p_s = (ego.pose @ ext).inverse().apply(target)
        sweeps.append(Sweep(t, ego, ["s"], p_s, [[7.0, 0.0, 0.0]]))
        raw.append(target[0])
    cloud = aggregate_sweeps(SweepBundle(sweeps, 0.0, {"s": ext}, keyframe_ego=sweeps[-1].ego))
    b = np.array([1.0, 0.0, 0.0])
    assert radial_spread(np.array(raw), b) > 0.5
    assert radial_spread(cloud.p_global, b) <= 1e-9
    np.testing.assert_allclose(cloud.v_radial, 27.0, atol=1e-9)
