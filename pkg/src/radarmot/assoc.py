"""Two-stage association: detection matching, then radar gating and recovery.

Stage one scores track/detection pairs with a bidirectional cross-check cost
and solves an optimal linear assignment. Stage two gates radar returns around
tracks: matched tracks pick up points for the Doppler update, and tracks the
detector missed can be kept alive as radar-seen.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InvalidConfig
from .geom import inflate_box_xy, points_in_box_xy
from .radar_prep import RadarCloud
from .records import Detection, Track

FORBIDDEN = 1e9


@dataclass(frozen=True)
class AssocConfig:
    w_fwd: float = 1.0
    w_bwd: float = 1.0
    w_spd: float = 1.0
    cost_gate: float = 2.0
    infl_update: float = 1.25
    infl_predict: float = 1.5
    delta_v: float = 1.0
    n_min: int = 2
    r_suppress: float = 3.0
    v_static: float = 0.5
    eps_speed: float = 0.5
    # forbid pairs above cost_gate before solving, so an implausible pair can
    # never displace a plausible one just to lower the total cost
    gate_before_solve: bool = True

    def __post_init__(self):
        if min(self.w_fwd, self.w_bwd, self.w_spd) < 0:
            raise InvalidConfig("association weights must be >= 0")
        if self.infl_update <= 0 or self.infl_predict <= 0:
            raise InvalidConfig("inflation factors must be > 0")
        if self.delta_v <= 0 or self.eps_speed <= 0:
            raise InvalidConfig("delta_v and eps_speed must be > 0")
        if self.n_min < 1:
            raise InvalidConfig("n_min must be >= 1")
        if self.cost_gate < 0 or self.r_suppress < 0 or self.v_static < 0:
            raise InvalidConfig("cost_gate, r_suppress and v_static must be >= 0")


@dataclass
class MatchResult:
    matches: list[tuple[int, int]] = field(default_factory=list)
    unmatched_tracks: list[int] = field(default_factory=list)
    unmatched_detections: list[int] = field(default_factory=list)


def cross_check_cost(track: Track, det: Detection, dt: float, cfg: AssocConfig) -> float:
    """Forward distance + backward distance + speed dissimilarity.

    The forward term compares the predicted track center with the detection,
    the backward term compares the track's previous posterior center with the
    detection moved back by its own velocity. Distances are normalized by the
    distance each side travels in ``dt``; speeds are floored at ``eps_speed``.
    """
    v_trk = track.speed
    v_det = det.speed
    p_det = det.center_xy
    fwd = np.hypot(*(track.state.position - p_det)) / max(v_trk * dt, cfg.eps_speed * dt)
    p_det_prev = p_det - det.box.velocity * dt
    bwd = np.hypot(*(track.prev_center - p_det_prev)) / max(v_det * dt, cfg.eps_speed * dt)
    spd = abs(v_trk - v_det) / max(v_trk, v_det, cfg.eps_speed)
    return float(cfg.w_fwd * fwd + cfg.w_bwd * bwd + cfg.w_spd * spd)


def forward_cost(track: Track, det: Detection, dt: float, cfg: AssocConfig) -> float:
    """Single-timestamp cost: only the forward term of :func:`cross_check_cost`."""
    d = np.hypot(*(track.state.position - det.center_xy))
    return float(cfg.w_fwd * d / max(track.speed * dt, cfg.eps_speed * dt))


def cost_matrix(tracks: Sequence[Track], detections: Sequence[Detection], dt: float, cfg: AssocConfig,
                cross_check: bool = True) -> np.ndarray:
    fn = cross_check_cost if cross_check else forward_cost
    C = np.full((len(tracks), len(detections)), np.inf)
    for i, trk in enumerate(tracks):
        for j, det in enumerate(detections):
            if trk.cls == det.cls:
                C[i, j] = fn(trk, det, dt, cfg)
    return C


def solve_gated_assignment(C: np.ndarray, gate: float) -> list[tuple[int, int]]:
    """Minimum-cost assignment over all rows/columns, then drop pairs costing more than ``gate``.

    Infinite entries are never matched. Returned pairs are (row, col), sorted by row.
    """
    C = np.asarray(C, dtype=float)
    if C.size == 0:
        return []
    finite = np.where(np.isfinite(C), C, FORBIDDEN)
    rows, cols = linear_sum_assignment(finite)
    pairs = [(int(r), int(c)) for r, c in zip(rows, cols) if np.isfinite(C[r, c]) and C[r, c] <= gate]
    return sorted(pairs)


def match_stage1(tracks: Sequence[Track], detections: Sequence[Detection], dt: float, cfg: AssocConfig,
                 cross_check: bool = True) -> MatchResult:
    order = sorted(range(len(tracks)), key=lambda i: tracks[i].id)
    tracks = [tracks[i] for i in order]
    C = cost_matrix(tracks, detections, dt, cfg, cross_check)
    if cfg.gate_before_solve:
        C = np.where(C <= cfg.cost_gate, C, np.inf)
    pairs = solve_gated_assignment(C, cfg.cost_gate)
    matched_t = {r for r, _ in pairs}
    matched_d = {c for _, c in pairs}
    return MatchResult(
        matches=[(tracks[r].id, c) for r, c in pairs],
        unmatched_tracks=[t.id for i, t in enumerate(tracks) if i not in matched_t],
        unmatched_detections=[j for j in range(len(detections)) if j not in matched_d],
    )


def radial_residuals(points: RadarCloud, velocity_xy: np.ndarray) -> np.ndarray:
    """``|v_radial - b^T R_xy v|`` for every point."""
    return np.abs(points.v_radial - points.los_xy @ np.asarray(velocity_xy, dtype=float))


def _gate(track: Track, points: RadarCloud, infl: float, delta_v: float) -> tuple[np.ndarray, np.ndarray]:
    box = inflate_box_xy(track.current_box(), infl)
    inside = points_in_box_xy(points.p_global, box)
    resid = radial_residuals(points, track.velocity)
    return inside & (resid <= delta_v), resid


def select_radar_points_for_update(track: Track, points: RadarCloud, cfg: AssocConfig) -> RadarCloud:
    """Points inside the inflated track box whose Doppler agrees with the box motion."""
    if len(points) == 0:
        return points
    mask, _ = _gate(track, points, cfg.infl_update, cfg.delta_v)
    return points.subset(mask)


def suppress_near_detections(points: RadarCloud, detections: Sequence[Detection], r_suppress: float,
                             v_static: float) -> RadarCloud:
    """Drop points near any detection center, and near-static clutter."""
    if len(points) == 0:
        return points
    keep = np.abs(points.v_radial) >= v_static
    if detections:
        centers = np.stack([d.center_xy for d in detections])
        diff = points.p_global[:, None, :2] - centers[None, :, :]
        near = np.any(np.hypot(diff[..., 0], diff[..., 1]) <= r_suppress, axis=1)
        keep &= ~near
    return points.subset(keep)


def radar_associate(unmatched_tracks: Sequence[Track], points: RadarCloud,
                    cfg: AssocConfig) -> list[tuple[int, RadarCloud]]:
    """Radar-seen tracks among those the detector missed.

    Each point goes to the gating track with the smallest Doppler residual
    (lower id on ties). A track is radar-seen when it keeps strictly more than
    ``n_min`` points.
    """
    tracks = sorted(unmatched_tracks, key=lambda t: t.id)
    if not tracks or len(points) == 0:
        return []
    n = len(points)
    best_resid = np.full(n, np.inf)
    owner = np.full(n, -1)
    for k, trk in enumerate(tracks):
        mask, resid = _gate(trk, points, cfg.infl_predict, cfg.delta_v)
        better = mask & (resid < best_resid)
        best_resid[better] = resid[better]
        owner[better] = k
    out = []
    for k, trk in enumerate(tracks):
        idx = np.flatnonzero(owner == k)
        if len(idx) > cfg.n_min:
            out.append((trk.id, points.subset(idx)))
    return out
