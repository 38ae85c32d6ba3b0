"""Per-frame tracking loop and track lifecycle.

Each keyframe runs: predict, detection matching, detection and radar updates
for matched tracks, radar recovery of unmatched tracks, lifecycle bookkeeping,
births, and output emission.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

from .assoc import (
    AssocConfig,
    match_stage1,
    radar_associate,
    select_radar_points_for_update,
    suppress_near_detections,
)
from .errors import InvalidConfig, NonMonotonicTime
from .geom import Box3D, wrap_angle
from .kalman import DetectionObservation, KfState, ProcessModel, build_radar_observation, predict, update_detection, update_radar
from .radar_prep import DEFAULT_R_EXCLUDE, RadarCloud, SweepBundle, aggregate_sweeps
from .records import Detection, Frame, Provenance, Scenario, Track, TrackOutput, TrackStatus

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LifecycleConfig:
    confirm_hits: int = 2
    max_misses_confirmed: int = 3
    max_misses_tentative: int = 1
    radar_seen_counts_as_hit: bool = True
    min_birth_score: float = 0.3

    def __post_init__(self):
        if min(self.confirm_hits, self.max_misses_confirmed, self.max_misses_tentative) < 1:
            raise InvalidConfig("lifecycle counts must be >= 1")
        if not 0.0 <= self.min_birth_score <= 1.0:
            raise InvalidConfig("min_birth_score must be in [0, 1]")


@dataclass(frozen=True)
class FilterConfig:
    q_accel: float = 1.0
    det_sigma_pos: float = 0.5
    sigma_radial: float = 0.5
    init_pos_std: float = 0.5
    init_vel_std: float = 3.0
    shape_smoothing: float = 0.5

    def __post_init__(self):
        if self.q_accel < 0 or self.det_sigma_pos <= 0 or self.sigma_radial <= 0:
            raise InvalidConfig("filter noise parameters must be positive")
        if self.init_pos_std <= 0 or self.init_vel_std <= 0:
            raise InvalidConfig("initial standard deviations must be positive")
        if not 0.0 <= self.shape_smoothing <= 1.0:
            raise InvalidConfig("shape_smoothing must be in [0, 1]")


@dataclass(frozen=True)
class TrackerConfig:
    """Everything the tracking loop needs. The three flags switch the ablation components."""

    assoc: AssocConfig = field(default_factory=AssocConfig)
    lifecycle: LifecycleConfig = field(default_factory=LifecycleConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    r_exclude: float = DEFAULT_R_EXCLUDE
    radar_kf: bool = True
    radar_assoc: bool = True
    cross_check: bool = True

    def ablated(self, **flags) -> TrackerConfig:
        return replace(self, **flags)


def _smooth_box(old: Box3D, det: Box3D, a: float) -> tuple[np.ndarray, float, float]:
    extents = (1 - a) * old.extents + a * det.extents
    yaw = wrap_angle(old.yaw + a * wrap_angle(det.yaw - old.yaw))
    z = (1 - a) * old.center[2] + a * det.center[2]
    return extents, yaw, z


class Tracker:
    """Stateful tracker for a single scene."""

    def __init__(self, cfg: TrackerConfig | None = None):
        self.cfg = cfg or TrackerConfig()
        self.model = ProcessModel(self.cfg.filter.q_accel)
        self.tracks: list[Track] = []
        self.next_id = 0
        self.last_t: float | None = None

    def _radar_points(self, frame: Frame) -> RadarCloud:
        if frame.radar is None:
            return RadarCloud.empty()
        if isinstance(frame.radar, SweepBundle):
            if not frame.radar.sweeps:
                return RadarCloud.empty()
            return aggregate_sweeps(frame.radar, self.cfg.r_exclude)
        return frame.radar

    def _birth(self, det: Detection) -> Track:
        fc = self.cfg.filter
        x = np.array([det.box.center[0], det.box.center[1], det.box.velocity[0], det.box.velocity[1]])
        P = np.diag([fc.init_pos_std**2] * 2 + [fc.init_vel_std**2] * 2)
        hits = 1
        status = TrackStatus.CONFIRMED if hits >= self.cfg.lifecycle.confirm_hits else TrackStatus.TENTATIVE
        trk = Track(
            id=self.next_id,
            cls=det.cls,
            state=KfState(x, P, self.last_t),
            box=det.box,
            prev_center=x[:2].copy(),
            hits=hits,
            status=status,
            score=float(det.score),
        )
        self.next_id += 1
        return trk

    def _radar_update(self, trk: Track, pts: RadarCloud) -> None:
        obs = build_radar_observation(trk.state, pts, self.cfg.filter.sigma_radial)
        trk.state = update_radar(trk.state, obs)

    def step(self, frame: Frame) -> list[TrackOutput]:
        cfg = self.cfg
        if self.last_t is not None and not frame.t > self.last_t:
            raise NonMonotonicTime(f"frame {frame.frame_id} at t={frame.t} does not follow t={self.last_t}")
        dt = 0.0 if self.last_t is None else frame.t - self.last_t
        self.last_t = frame.t
        points = self._radar_points(frame)
        dets = list(frame.detections)

        # (1) predict
        for trk in self.tracks:
            trk.prev_center = trk.state.position.copy()
            trk.state = predict(trk.state, self.model, frame.t - trk.state.t)

        # (2) detection matching
        by_id = {t.id: t for t in self.tracks}
        result = match_stage1(self.tracks, dets, dt, cfg.assoc, cross_check=cfg.cross_check)

        # (3) detection + radar update of matched tracks
        R_det = np.eye(2) * cfg.filter.det_sigma_pos**2
        a = cfg.filter.shape_smoothing
        for tid, j in result.matches:
            trk, det = by_id[tid], dets[j]
            trk.state = update_detection(trk.state, DetectionObservation(det.center_xy, R_det))
            extents, yaw, z = _smooth_box(trk.box, det.box, a)
            trk.box = Box3D(np.array([trk.state.x[0], trk.state.x[1], z]), extents, yaw, trk.state.velocity)
            trk.score = (1 - a) * trk.score + a * float(det.score)
            if cfg.radar_kf and len(points):
                sel = select_radar_points_for_update(trk, points, cfg.assoc)
                if len(sel):
                    self._radar_update(trk, sel)
            trk.box = trk.current_box()

        # (4) radar recovery of unmatched tracks
        radar_seen: set[int] = set()
        if cfg.radar_assoc and result.unmatched_tracks and len(points):
            free = suppress_near_detections(points, dets, cfg.assoc.r_suppress, cfg.assoc.v_static)
            unmatched = [by_id[tid] for tid in result.unmatched_tracks]
            for tid, pts in radar_associate(unmatched, free, cfg.assoc):
                radar_seen.add(tid)
                if cfg.radar_kf:
                    self._radar_update(by_id[tid], pts)

        # (5) lifecycle
        lc = cfg.lifecycle
        matched = {tid for tid, _ in result.matches}
        for trk in self.tracks:
            if trk.id in matched:
                trk.hits += 1
                trk.misses = 0
                trk.last_seen_by = Provenance.DETECTION
            elif trk.id in radar_seen:
                trk.last_seen_by = Provenance.RADAR
                if lc.radar_seen_counts_as_hit:
                    trk.hits += 1
                    trk.misses = 0
                else:
                    trk.misses += 1
            else:
                trk.misses += 1
            if trk.id not in matched:
                trk.box = trk.current_box()
            if trk.status is TrackStatus.TENTATIVE and trk.hits >= lc.confirm_hits:
                trk.status = TrackStatus.CONFIRMED
            limit = lc.max_misses_confirmed if trk.status is TrackStatus.CONFIRMED else lc.max_misses_tentative
            if trk.misses > limit:
                trk.status = TrackStatus.DEAD
        dead = [t.id for t in self.tracks if t.status is TrackStatus.DEAD]
        if dead:
            log.debug("frame %s: tracks %s died", frame.frame_id, dead)
        self.tracks = [t for t in self.tracks if t.status is not TrackStatus.DEAD]

        # (6) births
        born = set()
        for j in result.unmatched_detections:
            if dets[j].score >= lc.min_birth_score:
                trk = self._birth(dets[j])
                self.tracks.append(trk)
                born.add(trk.id)

        # (7) outputs
        out = []
        for trk in sorted(self.tracks, key=lambda t: t.id):
            if trk.status is not TrackStatus.CONFIRMED:
                continue
            if trk.id in matched or trk.id in born:
                prov = Provenance.DETECTION
            elif trk.id in radar_seen:
                prov = Provenance.RADAR
            else:
                continue
            box = trk.current_box()
            out.append(TrackOutput(frame.frame_id, trk.id, trk.cls, box, box.velocity, trk.score, prov))
        return out


def run_scene(scene: Scenario | Iterable[Frame], cfg: TrackerConfig | None = None) -> list[TrackOutput]:
    frames = scene.frames if isinstance(scene, Scenario) else list(scene)
    tracker = Tracker(cfg)
    outputs: list[TrackOutput] = []
    for frame in frames:
        outputs.extend(tracker.step(frame))
    return outputs
