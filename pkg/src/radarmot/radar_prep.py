"""Multi-sweep radar aggregation with ego and radial motion compensation.

Raw radar returns arrive per sweep in the sensor frame. Each return carries
the sensor-frame position and the radar-reported relative velocity. Aggregation
moves every return to the global frame, removes ego translation and rotation
from its velocity, then shifts it along its line of sight to the keyframe
time using the compensated radial velocity. Tangential motion is left alone
since a Doppler radar cannot observe it.

Frame conventions:

* ``EgoState.pose`` maps ego -> global; ``v_ego`` and ``omega_ego`` are
  expressed in the ego frame, as a vehicle odometry source reports them.
* Sensor extrinsics map sensor -> ego.
* ``RadarPoint.sensor_pose`` maps sensor -> global at the sweep time.
* ``v_comp`` is stored in the global frame; ``bearing`` in the sensor frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation, Slerp

from .errors import EmptyBundle, InvalidConfig
from .geom import Pose, bearing, bearings

DEFAULT_R_EXCLUDE = 15.0


@dataclass(frozen=True, eq=False)
class EgoState:
    pose: Pose = field(default_factory=Pose)
    v_ego: np.ndarray = field(default_factory=lambda: np.zeros(3))
    omega_ego: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rotation_center: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        for name in ("v_ego", "omega_ego", "rotation_center"):
            a = np.array(getattr(self, name), dtype=float).reshape(3)
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    def __eq__(self, other) -> bool:
        if not isinstance(other, EgoState):
            return NotImplemented
        return (
            self.pose == other.pose
            and np.array_equal(self.v_ego, other.v_ego)
            and np.array_equal(self.omega_ego, other.omega_ego)
            and np.array_equal(self.rotation_center, other.rotation_center)
        )

    __hash__ = None

    @property
    def position(self) -> np.ndarray:
        return self.pose.translation


def interpolate_ego(e0: EgoState, t0: float, e1: EgoState, t1: float, t: float) -> EgoState:
    """Ego state at ``t``: linear in translation and rates, slerp in rotation."""
    if t1 == t0:
        return e1
    a = (t - t0) / (t1 - t0)
    rots = Rotation.from_matrix(np.stack([e0.pose.rotation, e1.pose.rotation]))
    R = Slerp([0.0, 1.0], rots)([a]).as_matrix()[0]
    # re-orthonormalize to keep Pose validation happy after slerp round-off
    u, _, vt = np.linalg.svd(R)
    R = u @ vt
    lerp = lambda x, y: (1 - a) * x + a * y  # noqa: E731
    return EgoState(
        pose=Pose(R, lerp(e0.pose.translation, e1.pose.translation)),
        v_ego=lerp(e0.v_ego, e1.v_ego),
        omega_ego=lerp(e0.omega_ego, e1.omega_ego),
        rotation_center=e1.rotation_center,
    )


@dataclass
class RadarPoint:
    """A single radar return. See the module docstring for frames."""

    p_sensor: np.ndarray
    p_global: np.ndarray
    bearing: np.ndarray
    v_rel: np.ndarray
    v_radial: float
    v_comp: np.ndarray
    t_sweep: float
    sensor_id: str
    sensor_pose: Pose

    @classmethod
    def from_raw(cls, p_sensor, v_rel, t_sweep: float, sensor_id: str, sensor_pose: Pose) -> RadarPoint:
        """Build an uncompensated point; ``v_radial`` is the raw Doppler along the bearing."""
        p_sensor = np.asarray(p_sensor, dtype=float)
        v_rel = np.asarray(v_rel, dtype=float)
        b = bearing(p_sensor)
        return cls(
            p_sensor=p_sensor,
            p_global=sensor_pose.apply(p_sensor),
            bearing=b,
            v_rel=v_rel,
            v_radial=float(b @ v_rel),
            v_comp=sensor_pose.rotation @ v_rel,
            t_sweep=float(t_sweep),
            sensor_id=sensor_id,
            sensor_pose=sensor_pose,
        )

    @property
    def rot_global_to_sensor(self) -> np.ndarray:
        return self.sensor_pose.rotation.T


def compensate_ego(point: RadarPoint, ego: EgoState) -> np.ndarray:
    """Remove ego translation and rotation from the point's relative velocity.

    ``v_comp = v_rel + v_ego + omega_ego x r`` evaluated in the ego frame, where
    ``r`` runs from the ego rotation center to the point. The result is stored
    on the point in the global frame, and ``v_radial`` is recomputed from it.
    """
    R_eg = ego.pose.rotation
    p_ego = R_eg.T @ (point.p_global - ego.pose.translation)
    r = p_ego - ego.rotation_center
    R_se = R_eg.T @ point.sensor_pose.rotation
    v_comp_ego = R_se @ point.v_rel + ego.v_ego + np.cross(ego.omega_ego, r)
    v_comp = R_eg @ v_comp_ego
    point.v_comp = v_comp
    point.v_radial = float(point.bearing @ (point.sensor_pose.rotation.T @ v_comp))
    return v_comp


def compensate_position(point: RadarPoint, t_k: float) -> np.ndarray:
    """Shift the point along its global line of sight by ``v_radial * (t_k - t_sweep)``."""
    b_global = point.sensor_pose.rotation @ point.bearing
    return point.p_global + point.v_radial * (t_k - point.t_sweep) * b_global


@dataclass
class Sweep:
    """One raw radar acquisition: per-return sensor ids, positions and relative velocities."""

    t: float
    ego: EgoState | None
    sensor_ids: np.ndarray
    p_sensor: np.ndarray
    v_rel: np.ndarray

    def __post_init__(self):
        self.sensor_ids = np.asarray(self.sensor_ids, dtype=object).reshape(-1)
        self.p_sensor = np.asarray(self.p_sensor, dtype=float).reshape(-1, 3)
        self.v_rel = np.asarray(self.v_rel, dtype=float).reshape(-1, 3)
        if not (len(self.sensor_ids) == len(self.p_sensor) == len(self.v_rel)):
            raise InvalidConfig("sweep arrays have mismatched lengths")

    def __len__(self) -> int:
        return len(self.p_sensor)


@dataclass
class SweepBundle:
    """The sweeps feeding one keyframe, sorted by time, plus sensor extrinsics.

    Sweeps without their own ego state take one interpolated between
    ``prev_keyframe`` and ``keyframe_ego``, or ``keyframe_ego`` itself when no
    earlier keyframe is known.
    """

    sweeps: list[Sweep]
    t_keyframe: float
    extrinsics: dict[str, Pose]
    keyframe_ego: EgoState | None = None
    prev_keyframe: tuple[float, EgoState] | None = None

    def __post_init__(self):
        ts = [s.t for s in self.sweeps]
        if any(b < a for a, b in zip(ts, ts[1:])):
            raise InvalidConfig("sweeps must be sorted ascending by time")
        if any(t > self.t_keyframe + 1e-12 for t in ts):
            raise InvalidConfig("sweep timestamp after keyframe")


@dataclass
class RadarCloud:
    """Column-oriented set of compensated radar points.

    Vectorized stand-in for ``list[RadarPoint]``; indexing returns a
    :class:`RadarPoint` copy of one row.
    """

    p_global: np.ndarray
    bearing: np.ndarray
    v_radial: np.ndarray
    v_rel: np.ndarray
    v_comp: np.ndarray
    p_sensor: np.ndarray
    t_sweep: np.ndarray
    sensor_id: np.ndarray
    sensor_rot: np.ndarray  # (N, 3, 3) sensor -> global
    sensor_trans: np.ndarray  # (N, 3)

    def __post_init__(self):
        n = len(self.v_radial)
        self.p_global = np.asarray(self.p_global, dtype=float).reshape(n, 3)
        self.bearing = np.asarray(self.bearing, dtype=float).reshape(n, 3)
        self.v_radial = np.asarray(self.v_radial, dtype=float).reshape(n)
        self.v_rel = np.asarray(self.v_rel, dtype=float).reshape(n, 3)
        self.v_comp = np.asarray(self.v_comp, dtype=float).reshape(n, 3)
        self.p_sensor = np.asarray(self.p_sensor, dtype=float).reshape(n, 3)
        self.t_sweep = np.asarray(self.t_sweep, dtype=float).reshape(n)
        self.sensor_id = np.asarray(self.sensor_id, dtype=object).reshape(n)
        self.sensor_rot = np.asarray(self.sensor_rot, dtype=float).reshape(n, 3, 3)
        self.sensor_trans = np.asarray(self.sensor_trans, dtype=float).reshape(n, 3)
        self._los_xy = None

    @classmethod
    def empty(cls) -> RadarCloud:
        z3 = np.zeros((0, 3))
        return cls(z3, z3, np.zeros(0), z3, z3, z3, np.zeros(0), np.zeros(0, dtype=object), np.zeros((0, 3, 3)), z3)

    @classmethod
    def from_points(cls, points: list[RadarPoint]) -> RadarCloud:
        if not points:
            return cls.empty()
        return cls(
            p_global=np.stack([p.p_global for p in points]),
            bearing=np.stack([p.bearing for p in points]),
            v_radial=np.array([p.v_radial for p in points]),
            v_rel=np.stack([p.v_rel for p in points]),
            v_comp=np.stack([p.v_comp for p in points]),
            p_sensor=np.stack([p.p_sensor for p in points]),
            t_sweep=np.array([p.t_sweep for p in points]),
            sensor_id=np.array([p.sensor_id for p in points], dtype=object),
            sensor_rot=np.stack([p.sensor_pose.rotation for p in points]),
            sensor_trans=np.stack([p.sensor_pose.translation for p in points]),
        )

    def __len__(self) -> int:
        return len(self.v_radial)

    def __getitem__(self, i: int) -> RadarPoint:
        return RadarPoint(
            p_sensor=self.p_sensor[i].copy(),
            p_global=self.p_global[i].copy(),
            bearing=self.bearing[i].copy(),
            v_rel=self.v_rel[i].copy(),
            v_radial=float(self.v_radial[i]),
            v_comp=self.v_comp[i].copy(),
            t_sweep=float(self.t_sweep[i]),
            sensor_id=str(self.sensor_id[i]),
            sensor_pose=Pose(self.sensor_rot[i], self.sensor_trans[i]),
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def subset(self, idx) -> RadarCloud:
        """Rows selected by a boolean mask or an index array, in that order."""
        idx = np.asarray(idx)
        if idx.dtype != bool:
            idx = idx.astype(int)
        return RadarCloud(
            self.p_global[idx], self.bearing[idx], self.v_radial[idx], self.v_rel[idx], self.v_comp[idx],
            self.p_sensor[idx], self.t_sweep[idx], self.sensor_id[idx], self.sensor_rot[idx], self.sensor_trans[idx],
        )

    @property
    def los_xy(self) -> np.ndarray:
        """Per-point row ``b^T R_global->sensor[:, :2]``, i.e. the global line of sight's XY part."""
        if self._los_xy is None:
            self._los_xy = np.einsum("nij,nj->ni", self.sensor_rot, self.bearing)[:, :2]
        return self._los_xy

    def equals(self, other: RadarCloud) -> bool:
        if len(self) != len(other):
            return False
        return all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in ("p_global", "bearing", "v_radial", "v_rel", "v_comp", "p_sensor", "t_sweep",
                      "sensor_id", "sensor_rot", "sensor_trans")
        )


def _sweep_ego(bundle: SweepBundle, i: int) -> EgoState:
    sweep = bundle.sweeps[i]
    if sweep.ego is not None:
        return sweep.ego
    if bundle.keyframe_ego is None:
        raise InvalidConfig("sweep without ego state and no keyframe ego to fall back on")
    if bundle.prev_keyframe is not None:
        t0, e0 = bundle.prev_keyframe
        if t0 < sweep.t <= bundle.t_keyframe:
            return interpolate_ego(e0, t0, bundle.keyframe_ego, bundle.t_keyframe, sweep.t)
    return bundle.keyframe_ego


def aggregate_sweeps(bundle: SweepBundle, r_exclude: float = DEFAULT_R_EXCLUDE) -> RadarCloud:
    """Compensate and merge all sweeps of a keyframe.

    Points whose compensated XY position lies closer than ``r_exclude`` to
    the keyframe ego position are dropped. Output is ordered by sweep time,
    then sensor id, then input index.
    """
    if not bundle.sweeps:
        raise EmptyBundle("sweep bundle contains no sweeps")
    if r_exclude < 0:
        raise InvalidConfig("r_exclude must be >= 0")
    t_k = bundle.t_keyframe
    kf_ego = bundle.keyframe_ego or _sweep_ego(bundle, len(bundle.sweeps) - 1)

    parts = []
    for i, sweep in enumerate(bundle.sweeps):
        if len(sweep) == 0:
            continue
        ego = _sweep_ego(bundle, i)
        R_eg, t_eg = ego.pose.rotation, ego.pose.translation
        n = len(sweep)
        sensor_rot = np.empty((n, 3, 3))
        sensor_trans = np.empty((n, 3))
        for sid in np.unique(sweep.sensor_ids):
            if sid not in bundle.extrinsics:
                raise InvalidConfig(f"unknown radar sensor {sid!r}")
            sp = ego.pose @ bundle.extrinsics[sid]
            m = sweep.sensor_ids == sid
            sensor_rot[m] = sp.rotation
            sensor_trans[m] = sp.translation
        b = bearings(sweep.p_sensor)
        p_k = np.einsum("nij,nj->ni", sensor_rot, sweep.p_sensor) + sensor_trans
        # ego compensation, evaluated in the ego frame
        p_ego = (p_k - t_eg) @ R_eg
        r = p_ego - ego.rotation_center
        v_rel_ego = np.einsum("ji,njk,nk->ni", R_eg, sensor_rot, sweep.v_rel)
        v_comp_ego = v_rel_ego + ego.v_ego + np.cross(ego.omega_ego, r)
        v_comp = v_comp_ego @ R_eg.T
        v_radial = np.einsum("ni,nji,nj->n", b, sensor_rot, v_comp)
        # radial displacement to keyframe time
        b_global = np.einsum("nij,nj->ni", sensor_rot, b)
        p_comp = p_k + (v_radial * (t_k - sweep.t))[:, None] * b_global
        parts.append(
            RadarCloud(p_comp, b, v_radial, sweep.v_rel, v_comp, sweep.p_sensor, np.full(n, float(sweep.t)),
                       sweep.sensor_ids, sensor_rot, sensor_trans)
        )
    if not parts:
        return RadarCloud.empty()
    cloud = RadarCloud(*[np.concatenate([getattr(p, f) for p in parts]) for f in (
        "p_global", "bearing", "v_radial", "v_rel", "v_comp", "p_sensor", "t_sweep", "sensor_id",
        "sensor_rot", "sensor_trans")])
    d = np.hypot(*(cloud.p_global[:, :2] - kf_ego.position[:2]).T)
    keep = d >= r_exclude
    idx = np.arange(len(cloud))[keep]
    order = np.lexsort((idx, cloud.sensor_id[keep].astype(str), cloud.t_sweep[keep]))
    return cloud.subset(idx[order])


def radial_spread(points: np.ndarray, direction: np.ndarray) -> float:
    """Standard deviation of the points' projections on a direction."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    return float(np.std(np.asarray(points, dtype=float) @ d))


__all__ = [
    "DEFAULT_R_EXCLUDE", "EgoState", "RadarCloud", "RadarPoint", "Sweep", "SweepBundle",
    "aggregate_sweeps", "compensate_ego", "compensate_position", "interpolate_ego", "radial_spread",
]
