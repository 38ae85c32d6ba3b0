from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from radarmot.geom import Box3D, Pose, rot_z
from radarmot.kalman import KfState
from radarmot.radar_prep import EgoState, RadarCloud, RadarPoint
from radarmot.records import Detection, Frame, GtBox, Provenance, Scenario, Track, TrackOutput, TrackStatus

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

FIXTURES = Path(__file__).parent / "fixtures"

finite = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False, allow_infinity=False)
vec3 = st.tuples(finite, finite, finite).map(np.array)
angles = st.floats(min_value=-math.pi, max_value=math.pi, allow_nan=False)


@st.composite
def rotations(draw):
    """Uniform-ish random 3D rotations from three Euler angles."""
    a, b, c = draw(angles), draw(angles), draw(angles)
    ca, sa, cb, sb = math.cos(a), math.sin(a), math.cos(b), math.sin(b)
    rx = np.array([[1, 0, 0], [0, ca, -sa], [0, sa, ca]])
    ry = np.array([[cb, 0, sb], [0, 1, 0], [-sb, 0, cb]])
    return rot_z(c) @ ry @ rx


@st.composite
def poses(draw):
    return Pose(draw(rotations()), draw(vec3))


def make_track(tid=0, pos=(0.0, 0.0), vel=(0.0, 0.0), prev=None, cls="car", extents=(4.0, 2.0, 1.5), yaw=0.0,
               P=None, status=TrackStatus.CONFIRMED) -> Track:
    x = np.array([*pos, *vel], dtype=float)
    P = np.eye(4) if P is None else P
    box = Box3D(np.array([pos[0], pos[1], extents[2] / 2]), np.array(extents), yaw, np.array(vel))
    prev = np.array(pos if prev is None else prev, dtype=float)
    return Track(tid, cls, KfState(x, P, 0.0), box, prev, hits=2, status=status)


def make_det(pos=(0.0, 0.0), vel=(0.0, 0.0), cls="car", score=0.9, extents=(4.0, 2.0, 1.5), yaw=0.0) -> Detection:
    box = Box3D(np.array([pos[0], pos[1], extents[2] / 2]), np.array(extents), yaw, np.array(vel))
    return Detection(box, score, cls)


def make_cloud(xy, v_radial, sensor_xy=(-50.0, 0.0)) -> RadarCloud:
    """Points at planar positions ``xy`` seen by one unrotated sensor at ``sensor_xy``."""
    sensor = Pose(np.eye(3), [sensor_xy[0], sensor_xy[1], 0.0])
    pts = []
    for (x, y), vr in zip(np.reshape(xy, (-1, 2)), np.atleast_1d(v_radial)):
        pt = RadarPoint.from_raw(sensor.inverse().apply([x, y, 0.0]), [0, 0, 0], 0.0, "s", sensor)
        pt.v_radial = float(vr)
        pts.append(pt)
    return RadarCloud.from_points(pts)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_gt_scene(rng, scene_id="s", n_frames=None, classes=("car", "truck", "pedestrian")) -> Scenario:
    """Straight-line ground-truth objects around a moving ego; some leave and enter the range caps."""
    n_frames = int(rng.integers(3, 15)) if n_frames is None else n_frames
    n_obj = int(rng.integers(0, 12))
    start = rng.uniform(-170, 170, (n_obj, 2))
    vel = rng.normal(0, 8, (n_obj, 2))
    cls = rng.choice(list(classes), n_obj)
    if n_obj:
        # a companion 1.5 m from the first object keeps a pair inside the matching gate
        start = np.vstack([start, start[:1] + [1.5, 0.0]])
        vel = np.vstack([vel, vel[:1]])
        cls = np.append(cls, cls[0])
        n_obj += 1
    first = rng.integers(0, n_frames, n_obj)
    last = np.minimum(n_frames, first + rng.integers(1, n_frames + 1, n_obj))
    frames = []
    for k in range(n_frames):
        t = 0.5 * k
        ego = EgoState(Pose.from_yaw(0.0, (10.0 * t, 0.0, 0.0)), [10.0, 0, 0])
        gts = [GtBox(f"obj{i}", str(cls[i]), Box3D([*(start[i] + vel[i] * t), 0.8], [4, 2, 1.6], 0.0, vel[i]))
               for i in range(n_obj) if first[i] <= k < last[i]]
        frames.append(Frame(f"{scene_id}-{k:03d}", t, ego, [], None, gts))
    return Scenario(scene_id, frames)


def outputs_from_gt(scene: Scenario, score=1.0, keep=lambda k, g: True) -> list[TrackOutput]:
    """Ground truth replayed as tracker output with one stable integer id per instance."""
    ids: dict[str, int] = {}
    out = []
    for k, fr in enumerate(scene.frames):
        for g in fr.gt:
            if keep(k, g):
                tid = ids.setdefault(g.instance_id, len(ids))
                out.append(TrackOutput(fr.frame_id, tid, g.cls, g.box, g.box.velocity[:2], score,
                                       Provenance.DETECTION))
    return out


# --- acceptance reporting -------------------------------------------------------------

ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    crit = item.get_closest_marker("criterion")
    if crit is None or rep.when not in ("setup", "call"):
        return
    if rep.when == "setup" and rep.passed:
        return
    num, title = crit.args
    status = "PASS" if rep.passed else "FAIL"
    ACCEPTANCE_LINES[num] = f"CRITERION {num} {status}  {title}  ({rep.duration:.1f} s)"


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[num])
