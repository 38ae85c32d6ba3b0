"""Seeded synthetic driving scenes: ground truth, degraded detections and radar sweeps.

Objects follow constant-velocity (optionally constant-turn) paths in lanes
parallel to the ego's initial heading. Spawn positions are rejection-sampled
so that no two boxes ever overlap. The detector channel adds Gaussian
noise and drops boxes with a range-dependent probability. Radar returns are
sampled on the box face nearest each sensor with exact Doppler, plus
near-static clutter.

Random streams for objects, detections, radar and clutter are spawned
separately from the seed, so switching one channel off leaves the draws of
the others unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import InvalidConfig
from .geom import Box3D, Pose, bearings, rot_z, wrap_angle
from .radar_prep import EgoState, Sweep, SweepBundle
from .records import Detection, Frame, GtBox, Scenario

CLASS_EXTENTS = {
    "car": (4.5, 1.9, 1.6),
    "truck": (10.0, 2.5, 3.5),
    "bus": (12.0, 2.6, 3.2),
    "trailer": (12.0, 2.5, 3.8),
    "pedestrian": (0.7, 0.7, 1.8),
    "bicycle": (1.8, 0.6, 1.5),
    "motorcycle": (2.1, 0.8, 1.5),
}
SMALL_CLASSES = ("pedestrian", "bicycle", "motorcycle")

# id -> (x, y, z, yaw) in the ego frame
DEFAULT_SENSORS = {
    "radar_front": (4.0, 0.0, 0.8, 0.0),
    "radar_rear": (-1.0, 0.0, 0.8, math.pi),
    "radar_left": (1.5, 1.0, 0.8, math.pi / 2),
    "radar_right": (1.5, -1.0, 0.8, -math.pi / 2),
}


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 0
    scene_id: str | None = None
    duration_s: float = 20.0
    keyframe_hz: float = 2.0
    sweeps_per_keyframe: int = 3
    sweep_interval_s: float = 0.05
    # objects
    n_objects: Mapping[str, int] = field(default_factory=lambda: {"car": 6, "truck": 3})
    rel_speed_range: tuple[float, float] = (-8.0, 8.0)
    oncoming_speed_range: tuple[float, float] = (15.0, 30.0)
    small_speed_range: tuple[float, float] = (0.5, 2.0)
    oncoming_fraction: float = 0.25
    lanes_per_direction: int = 3
    lane_width: float = 3.5
    spawn_x_range: tuple[float, float] = (-60.0, 160.0)
    max_object_yaw_rate: float = 0.0
    # ego
    ego_speed: float = 20.0
    ego_yaw_rate: float = 0.0
    # detector
    det_sigma_pos: float = 0.3
    det_sigma_vel: float = 1.0
    det_sigma_size: float = 0.05
    det_sigma_yaw: float = 0.05
    det_max_range: float = 160.0
    dropout_base: float = 0.1
    dropout_per_100m: float = 0.2
    score_base: float = 0.9
    score_per_100m: float = 0.3
    score_noise: float = 0.05
    false_det_rate: float = 0.5
    blackouts: tuple[tuple[int, int, int], ...] = ()  # (object index, first keyframe, n keyframes)
    # radar
    radar_enabled: bool = True
    radar_points_base: float = 4.0
    radar_range_scale: float = 150.0
    radar_max_range: float = 250.0
    radar_fov_deg: float = 120.0
    radar_sigma: float = 0.3
    clutter_density: float = 2e-4
    clutter_radius: float = 150.0
    clutter_sigma_v: float = 0.2
    sensors: Mapping[str, tuple[float, float, float, float]] = field(default_factory=lambda: dict(DEFAULT_SENSORS))
    conditions: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        rates = (self.dropout_base, self.dropout_per_100m, self.oncoming_fraction)
        if any(not 0.0 <= r <= 1.0 for r in rates):
            raise InvalidConfig("rates must lie in [0, 1]")
        sigmas = (self.det_sigma_pos, self.det_sigma_vel, self.det_sigma_size, self.det_sigma_yaw,
                  self.radar_sigma, self.clutter_sigma_v, self.score_noise)
        if any(s < 0 for s in sigmas):
            raise InvalidConfig("noise standard deviations must be >= 0")
        if not self.keyframe_hz > 0 or not self.duration_s > 0:
            raise InvalidConfig("keyframe_hz and duration_s must be > 0")
        if self.sweeps_per_keyframe < 1 or self.sweep_interval_s < 0:
            raise InvalidConfig("need at least one sweep per keyframe and a non-negative interval")
        if self.sweep_interval_s * (self.sweeps_per_keyframe - 1) >= 1.0 / self.keyframe_hz:
            raise InvalidConfig("sweeps of one keyframe must fit inside the keyframe interval")
        if any(c not in CLASS_EXTENTS for c in self.n_objects):
            raise InvalidConfig(f"unknown class in n_objects: {sorted(self.n_objects)}")
        if any(n < 0 for n in self.n_objects.values()):
            raise InvalidConfig("object counts must be >= 0")
        if self.false_det_rate < 0 or self.clutter_density < 0 or self.radar_points_base < 0:
            raise InvalidConfig("rates and densities must be >= 0")

    @property
    def n_keyframes(self) -> int:
        return int(round(self.duration_s * self.keyframe_hz))

    def dropout(self, rng_m: float) -> float:
        return min(1.0, max(0.0, self.dropout_base + self.dropout_per_100m * rng_m / 100.0))


@dataclass(frozen=True)
class _Mover:
    """Constant speed, constant yaw-rate planar path."""

    p0: np.ndarray
    heading0: float
    speed: float
    yaw_rate: float = 0.0

    def heading(self, t: float) -> float:
        return self.heading0 + self.yaw_rate * t

    def position(self, t: float) -> np.ndarray:
        if abs(self.yaw_rate) < 1e-12:
            d = self.speed * t * np.array([math.cos(self.heading0), math.sin(self.heading0)])
        else:
            k = self.speed / self.yaw_rate
            h0, h1 = self.heading0, self.heading(t)
            d = k * np.array([math.sin(h1) - math.sin(h0), -math.cos(h1) + math.cos(h0)])
        return self.p0 + d

    def velocity(self, t: float) -> np.ndarray:
        h = self.heading(t)
        return self.speed * np.array([math.cos(h), math.sin(h)])


@dataclass(frozen=True)
class _Object:
    instance_id: str
    cls: str
    extents: np.ndarray
    path: _Mover

    def box(self, t: float) -> Box3D:
        p = self.path.position(t)
        v = self.path.velocity(t)
        return Box3D(np.array([p[0], p[1], self.extents[2] / 2]), self.extents, self.path.heading(t), v)


def _ego_state(path: _Mover, t: float) -> EgoState:
    p = path.position(t)
    return EgoState(
        pose=Pose(rot_z(path.heading(t)), np.array([p[0], p[1], 0.0])),
        v_ego=np.array([path.speed, 0.0, 0.0]),
        omega_ego=np.array([0.0, 0.0, path.yaw_rate]),
    )


def sensor_extrinsics(sensors: Mapping[str, tuple[float, float, float, float]]) -> dict[str, Pose]:
    return {sid: Pose.from_yaw(yaw, (x, y, z)) for sid, (x, y, z, yaw) in sorted(sensors.items())}


_SPAWN_TRIES = 100
_MIN_GAP = 2.0  # bumper-to-bumper, metres


def _conflicts(a: _Object, b: _Object, times: np.ndarray, fwd: np.ndarray, left: np.ndarray) -> bool:
    """True if the two footprints come within the minimum gap at any sampled time."""
    pa = np.array([a.path.position(t) for t in times])
    pb = np.array([b.path.position(t) for t in times])
    d = pa - pb
    lon, lat = np.abs(d @ fwd), np.abs(d @ left)
    near_lon = lon < (a.extents[0] + b.extents[0]) / 2 + _MIN_GAP
    near_lat = lat < (a.extents[1] + b.extents[1]) / 2 + 0.3
    return bool(np.any(near_lon & near_lat))


def _spawn_objects(cfg: ScenarioConfig, ego_path: _Mover, rng: np.random.Generator) -> list[_Object]:
    """Place objects in lanes beside the ego lane; objects never overlap during the scene.

    Candidates that would run into an already placed object are redrawn; an
    object that still conflicts after many draws is left out.
    """
    objs: list[_Object] = []
    h0 = ego_path.heading0
    fwd = np.array([math.cos(h0), math.sin(h0)])
    left = np.array([-fwd[1], fwd[0]])
    times = np.linspace(0.0, cfg.duration_s, max(2, int(cfg.duration_s * 10) + 1))
    k = 0
    for cls in sorted(cfg.n_objects):
        ext = np.array(CLASS_EXTENTS[cls], dtype=float)
        for _ in range(cfg.n_objects[cls]):
            for _attempt in range(_SPAWN_TRIES):
                x = rng.uniform(*cfg.spawn_x_range)
                yaw_rate = rng.uniform(-cfg.max_object_yaw_rate, cfg.max_object_yaw_rate)
                if cls in SMALL_CLASSES:
                    side = rng.choice([-1.0, 1.0])
                    y = side * ((cfg.lanes_per_direction + 0.5) * cfg.lane_width + rng.uniform(1.0, 4.0))
                    heading = h0 + (0.0 if rng.random() < 0.5 else math.pi)
                    speed = rng.uniform(*cfg.small_speed_range)
                elif rng.random() < cfg.oncoming_fraction:
                    lane = rng.integers(cfg.lanes_per_direction)
                    y = (lane + 1) * cfg.lane_width
                    heading = h0 + math.pi
                    speed = rng.uniform(*cfg.oncoming_speed_range)
                else:
                    lane = rng.integers(cfg.lanes_per_direction)
                    y = -(lane + 1) * cfg.lane_width
                    heading = h0
                    speed = max(0.0, cfg.ego_speed + rng.uniform(*cfg.rel_speed_range))
                p0 = ego_path.p0 + x * fwd + y * left
                cand = _Object(f"obj{k}", cls, ext, _Mover(p0, wrap_angle(heading), speed, yaw_rate))
                if not any(_conflicts(cand, o, times, fwd, left) for o in objs):
                    objs.append(cand)
                    k += 1
                    break
    return objs


def _nearest_face_samples(box: Box3D, sensor_xy: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform samples on the vertical box face whose center is nearest the sensor."""
    L, W, H = box.extents
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    ax_l = np.array([c, s])
    ax_w = np.array([-s, c])
    center = box.center[:2]
    faces = [
        (center + ax_l * L / 2, ax_w, W),
        (center - ax_l * L / 2, ax_w, W),
        (center + ax_w * W / 2, ax_l, L),
        (center - ax_w * W / 2, ax_l, L),
    ]
    fc, along, span = min(faces, key=lambda f: float(np.hypot(*(f[0] - sensor_xy))))
    u = rng.uniform(-0.5, 0.5, n) * span
    z = rng.uniform(0.0, H, n) + box.center[2] - H / 2
    xy = fc + u[:, None] * along
    return np.column_stack([xy, z])


def _in_fov(p_sensor: np.ndarray, fov_deg: float, max_range: float) -> np.ndarray:
    az = np.arctan2(p_sensor[:, 1], p_sensor[:, 0])
    rng_ = np.linalg.norm(p_sensor, axis=1)
    return (np.abs(az) <= math.radians(fov_deg) / 2) & (rng_ <= max_range) & (rng_ > 1e-3)


def _doppler_returns(p_global: np.ndarray, v_obj_global: np.ndarray, ego: EgoState, sensor_pose: Pose,
                     sigma: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Sensor-frame positions and relative velocities of returns from known world velocities.

    The relative velocity is the target velocity minus the ego-induced velocity
    at the point, rotated into the sensor frame, plus radial noise.
    """
    p_s = sensor_pose.inverse().apply(p_global)
    R_eg = ego.pose.rotation
    r = (p_global - ego.pose.translation) @ R_eg - ego.rotation_center
    v_ego_pt = (ego.v_ego + np.cross(ego.omega_ego, r)) @ R_eg.T
    v_rel = (v_obj_global - v_ego_pt) @ sensor_pose.rotation
    if sigma > 0:
        b = bearings(p_s)
        v_rel = v_rel + (sigma * rng.standard_normal(len(p_s)))[:, None] * b
    return p_s, v_rel


def generate(cfg: ScenarioConfig) -> Scenario:
    """Build a full scene from a config; identical configs give identical scenes."""
    ss = np.random.SeedSequence(cfg.seed)
    rng_obj, rng_det, rng_radar, rng_clutter, rng_fp = (np.random.default_rng(s) for s in ss.spawn(5))

    ego_path = _Mover(np.zeros(2), 0.0, cfg.ego_speed, cfg.ego_yaw_rate)
    objects = _spawn_objects(cfg, ego_path, rng_obj)
    extrinsics = sensor_extrinsics(cfg.sensors)
    blackout = {(i, k) for i, k0, n in cfg.blackouts for k in range(k0, k0 + n)}
    classes = sorted(c for c, n in cfg.n_objects.items() if n > 0) or ["car"]
    dt = 1.0 / cfg.keyframe_hz
    frames = []

    for k in range(cfg.n_keyframes):
        t = k * dt
        ego = _ego_state(ego_path, t)
        ego_xy = ego.position[:2]
        gt = [GtBox(o.instance_id, o.cls, o.box(t)) for o in objects]

        dets = []
        for i, g in enumerate(gt):
            rng_m = float(np.hypot(*(g.box.center[:2] - ego_xy)))
            # draw every random number unconditionally to keep streams aligned across configs
            u = rng_det.random()
            noise = rng_det.standard_normal(9)
            if rng_m > cfg.det_max_range or (i, k) in blackout or u < cfg.dropout(rng_m):
                continue
            b = g.box
            center = b.center + np.array([noise[0], noise[1], 0.0]) * cfg.det_sigma_pos
            extents = np.maximum(b.extents * (1 + cfg.det_sigma_size * noise[2:5]), 0.1)
            yaw = b.yaw + cfg.det_sigma_yaw * noise[5]
            vel = b.velocity + cfg.det_sigma_vel * noise[6:8]
            score = cfg.score_base - cfg.score_per_100m * rng_m / 100.0 + cfg.score_noise * noise[8]
            dets.append(Detection(Box3D(center, extents, yaw, vel), float(np.clip(score, 0.01, 1.0)), g.cls))
        for _ in range(rng_fp.poisson(cfg.false_det_rate)):
            cls = classes[rng_fp.integers(len(classes))]
            rad = 120.0 * math.sqrt(rng_fp.random())
            ang = rng_fp.uniform(-math.pi, math.pi)
            c = ego_xy + rad * np.array([math.cos(ang), math.sin(ang)])
            ext = np.array(CLASS_EXTENTS[cls])
            box = Box3D(np.array([c[0], c[1], ext[2] / 2]), ext, rng_fp.uniform(-math.pi, math.pi),
                        rng_fp.normal(0.0, 2.0, 2))
            dets.append(Detection(box, float(rng_fp.uniform(0.1, 0.45)), cls))

        radar = None
        if cfg.radar_enabled:
            sweeps = []
            for j in range(cfg.sweeps_per_keyframe):
                ts = t - (cfg.sweeps_per_keyframe - 1 - j) * cfg.sweep_interval_s
                sweeps.append(_radar_sweep(cfg, objects, _ego_state(ego_path, ts), ts, extrinsics, rng_radar,
                                           rng_clutter))
            radar = SweepBundle(sweeps, t, extrinsics, keyframe_ego=ego)
        frames.append(Frame(f"{k:04d}", t, ego, dets, radar, gt))

    scene_id = cfg.scene_id or f"sim-{cfg.seed}"
    return Scenario(scene_id, frames, dict(cfg.conditions), extrinsics)


def _radar_sweep(cfg: ScenarioConfig, objects: list[_Object], ego: EgoState, ts: float,
                 extrinsics: dict[str, Pose], rng: np.random.Generator, rng_clutter: np.random.Generator) -> Sweep:
    ids, ps, vs = [], [], []
    for sid, ext in extrinsics.items():
        spose = ego.pose @ ext
        s_xy = spose.translation[:2]
        for o in objects:
            box = o.box(ts)
            rng_m = float(np.hypot(*(box.center[:2] - s_xy)))
            size = math.sqrt(box.extents[0] * box.extents[1] / (4.5 * 1.9))
            lam = cfg.radar_points_base * size * math.exp(-rng_m / cfg.radar_range_scale)
            n = int(rng.poisson(lam))
            if n == 0 or rng_m > cfg.radar_max_range:
                continue
            pg = _nearest_face_samples(box, s_xy, n, rng)
            p_s = spose.inverse().apply(pg)
            ok = _in_fov(p_s, cfg.radar_fov_deg, cfg.radar_max_range)
            if not ok.any():
                continue
            v_obj = np.zeros((n, 3))
            v_obj[:, :2] = box.velocity
            p_s, v_rel = _doppler_returns(pg[ok], v_obj[ok], ego, spose, cfg.radar_sigma, rng)
            ids.extend([sid] * len(p_s))
            ps.append(p_s)
            vs.append(v_rel)
        # clutter: static reflectors with a small spread of world radial velocity
        half = math.radians(cfg.radar_fov_deg) / 2
        area = half * cfg.clutter_radius**2
        m = int(rng_clutter.poisson(cfg.clutter_density * area))
        if m:
            rad = cfg.clutter_radius * np.sqrt(rng_clutter.uniform(0.01, 1.0, m))
            az = rng_clutter.uniform(-half, half, m)
            p_s = np.column_stack([rad * np.cos(az), rad * np.sin(az), rng_clutter.uniform(-0.5, 1.0, m)])
            pg = spose.apply(p_s)
            b_g = bearings(p_s) @ spose.rotation.T
            v_obj = rng_clutter.normal(0.0, cfg.clutter_sigma_v, m)[:, None] * b_g
            p_s, v_rel = _doppler_returns(pg, v_obj, ego, spose, 0.0, rng_clutter)
            ids.extend([sid] * m)
            ps.append(p_s)
            vs.append(v_rel)
    if not ps:
        return Sweep(ts, ego, np.zeros(0, dtype=object), np.zeros((0, 3)), np.zeros((0, 3)))
    return Sweep(ts, ego, np.array(ids, dtype=object), np.concatenate(ps), np.concatenate(vs))
