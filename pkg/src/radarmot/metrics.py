"""nuScenes-style tracking evaluation (AMOTA, MOTAR, TP/FP/FN/IDS).

A prediction is a true positive when its BEV center lies within
``dist_gate`` of a ground-truth center. Frames are matched CLEAR-MOT style:
last frame's GT/prediction pairs are kept while still inside the gate, the
rest are matched by minimum total center distance.

AMOTA averages MOTAR over the recall points ``1/(n-1), ..., 1``. For each
recall point the confidence threshold is the highest one whose TP count
reaches that recall on the unthresholded run. Unreachable recalls score 0.
MOTAR is evaluated with the recall actually achieved at that threshold.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InvalidConfig, InvalidRecall, NoPositives, SchemaMismatch
from .records import GtBox, Scenario, TrackOutput

VEHICLE_RANGE = 150.0
SMALL_RANGE = 75.0
DEFAULT_RANGE_CAPS = {
    "car": VEHICLE_RANGE,
    "truck": VEHICLE_RANGE,
    "bus": VEHICLE_RANGE,
    "trailer": VEHICLE_RANGE,
    "pedestrian": SMALL_RANGE,
    "motorcycle": SMALL_RANGE,
    "bicycle": SMALL_RANGE,
}
OPERATING_POINT_NOTE = "TP/FP/FN/IDS reported at the recall threshold with the highest MOTA, per class"

_TP, _FN, _FP, _IDS = 0, 1, 2, 3


@dataclass(frozen=True)
class EvalConfig:
    n_recall: int = 40
    dist_gate: float = 2.0
    class_range_caps: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_RANGE_CAPS))
    default_range_cap: float | None = None
    range_bins: tuple[tuple[float, float], ...] = ((0.0, 50.0), (50.0, 100.0), (100.0, 150.0))
    condition_tags: tuple[str, ...] = ("weather", "lighting", "area")

    def __post_init__(self):
        if self.n_recall < 2:
            raise InvalidConfig("n_recall must be >= 2")
        if not self.dist_gate > 0:
            raise InvalidConfig("dist_gate must be > 0")
        bins = sorted((float(lo), float(hi)) for lo, hi in self.range_bins)
        for lo, hi in bins:
            if not hi > lo:
                raise InvalidConfig(f"empty range bin [{lo}, {hi})")
        for (_, hi), (lo, _) in zip(bins, bins[1:]):
            if lo < hi:
                raise InvalidConfig("range bins overlap")
        object.__setattr__(self, "range_bins", tuple(tuple(b) for b in self.range_bins))
        object.__setattr__(self, "condition_tags", tuple(self.condition_tags))

    def range_cap(self, cls: str) -> float | None:
        return self.class_range_caps.get(cls, self.default_range_cap)


@dataclass
class FrameCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    ids: int = 0

    def __iadd__(self, other: FrameCounts) -> FrameCounts:
        self.tp += other.tp
        self.fp += other.fp
        self.fn += other.fn
        self.ids += other.ids
        return self


def recall_points(n: int) -> list[float]:
    return [j / (n - 1) for j in range(1, n)]


def motar(ids_r: int, fp_r: int, fn_r: int, r: float, P: int) -> float:
    """MOTAR at recall ``r`` over ``P`` positives, clamped to [0, 1]."""
    if not 0.0 < r <= 1.0:
        raise InvalidRecall(f"recall must be in (0, 1], got {r}")
    if P <= 0:
        raise NoPositives("class has no ground-truth positives")
    val = 1.0 - (ids_r + fp_r + fn_r - (1.0 - r) * P) / (r * P)
    return min(1.0, max(0.0, val))


def amota(per_recall_motar: Mapping[float, float], n: int) -> float:
    """Mean MOTAR over the ``n - 1`` recall points; missing points count as 0."""
    keys = list(per_recall_motar)
    total = 0.0
    for r in recall_points(n):
        hit = next((k for k in keys if math.isclose(k, r, rel_tol=0.0, abs_tol=1e-9)), None)
        if hit is not None:
            total += per_recall_motar[hit]
    return total / (n - 1)


def _assign(gt_xy: np.ndarray, pr_xy: np.ndarray, gate: float) -> list[tuple[int, int]]:
    if len(gt_xy) == 0 or len(pr_xy) == 0:
        return []
    d = np.hypot(gt_xy[:, None, 0] - pr_xy[None, :, 0], gt_xy[:, None, 1] - pr_xy[None, :, 1])
    ok = d <= gate
    if not ok.any():
        return []
    # rows/cols with no admissible partner are irrelevant to the assignment
    rs = np.flatnonzero(ok.any(axis=1))
    cs = np.flatnonzero(ok.any(axis=0))
    sub = np.where(ok[np.ix_(rs, cs)], d[np.ix_(rs, cs)], 1e9)
    r, c = linear_sum_assignment(sub)
    return [(int(rs[i]), int(cs[j])) for i, j in zip(r, c) if ok[rs[i], cs[j]]]


def _match_core(gt_ids, gt_xy, pr_ids, pr_xy, prior: Mapping, gate: float):
    """Returns matched (gi, pj) pairs, the set of GT indices that switched, and the new id map."""
    gt_xy = np.asarray(gt_xy, dtype=float).reshape(-1, 2)
    pr_xy = np.asarray(pr_xy, dtype=float).reshape(-1, 2)
    pairs: list[tuple[int, int]] = []
    used_g: set[int] = set()
    used_p: set[int] = set()
    pr_index = {pid: j for j, pid in enumerate(pr_ids)}
    for gi, gid in enumerate(gt_ids):
        pid = prior.get(gid)
        j = pr_index.get(pid) if pid is not None else None
        if j is not None and j not in used_p and np.hypot(*(gt_xy[gi] - pr_xy[j])) <= gate:
            pairs.append((gi, j))
            used_g.add(gi)
            used_p.add(j)
    rest_g = [i for i in range(len(gt_ids)) if i not in used_g]
    rest_p = [j for j in range(len(pr_ids)) if j not in used_p]
    for a, b in _assign(gt_xy[rest_g], pr_xy[rest_p], gate):
        pairs.append((rest_g[a], rest_p[b]))
    new_map = dict(prior)
    switched = set()
    for gi, j in pairs:
        gid, pid = gt_ids[gi], pr_ids[j]
        if gid in prior and prior[gid] != pid:
            switched.add(gi)
        new_map[gid] = pid
    return sorted(pairs), switched, new_map


def match_frame(gt_boxes: Sequence[GtBox], pred_outputs: Sequence[TrackOutput], prior_id_map: Mapping,
                dist_gate: float = 2.0) -> tuple[FrameCounts, dict]:
    gt_ids = [g.instance_id for g in gt_boxes]
    pr_ids = [p.track_id for p in pred_outputs]
    gt_xy = [g.box.center[:2] for g in gt_boxes]
    pr_xy = [p.box.center[:2] for p in pred_outputs]
    pairs, switched, new_map = _match_core(gt_ids, gt_xy, pr_ids, pr_xy, prior_id_map, dist_gate)
    counts = FrameCounts(tp=len(pairs), fp=len(pr_ids) - len(pairs), fn=len(gt_ids) - len(pairs), ids=len(switched))
    return counts, new_map


# --- evaluation over scenes ---------------------------------------------------


@dataclass
class _FrameData:
    gt_ids: list
    gt_xy: np.ndarray
    gt_dist: np.ndarray
    gt_vel: np.ndarray
    pr_ids: np.ndarray
    pr_xy: np.ndarray
    pr_dist: np.ndarray
    pr_score: np.ndarray
    pr_vel: np.ndarray


@dataclass
class _Events:
    """Flat per-event arrays from one thresholded run of one class."""

    kind: np.ndarray
    scene: np.ndarray
    dist: np.ndarray
    score: np.ndarray

    def count(self, mask: np.ndarray) -> FrameCounts:
        k = self.kind[mask]
        return FrameCounts(
            tp=int(np.sum(k == _TP)), fn=int(np.sum(k == _FN)), fp=int(np.sum(k == _FP)), ids=int(np.sum(k == _IDS))
        )


@dataclass
class GroupMetrics:
    amota: float
    positives: int
    tp: int
    fp: int
    fn: int
    ids: int
    motar: list[float] = field(default_factory=list)


@dataclass
class MetricsReport:
    amota: float
    tp: int
    fp: int
    fn: int
    ids: int
    per_class: dict[str, GroupMetrics]
    by_range: dict[str, GroupMetrics] = field(default_factory=dict)
    by_condition: dict[str, GroupMetrics] = field(default_factory=dict)
    n_recall: int = 40
    note: str = OPERATING_POINT_NOTE

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> MetricsReport:
        try:
            groups = lambda m: {k: GroupMetrics(**v) for k, v in m.items()}  # noqa: E731
            return cls(
                amota=d["amota"], tp=d["tp"], fp=d["fp"], fn=d["fn"], ids=d["ids"],
                per_class=groups(d["per_class"]), by_range=groups(d.get("by_range", {})),
                by_condition=groups(d.get("by_condition", {})), n_recall=d.get("n_recall", 40),
                note=d.get("note", OPERATING_POINT_NOTE),
            )
        except (KeyError, TypeError) as e:
            raise SchemaMismatch(f"malformed metrics report: {e}") from None


def range_bin_label(lo: float, hi: float) -> str:
    return f"{lo:g}-{hi:g}m"


class _ClassEvaluator:
    """Holds the per-frame data of one class across scenes and caches thresholded runs."""

    def __init__(self, scenes: list[list[_FrameData]], gate: float):
        self.scenes = scenes
        self.gate = gate
        self._cache: dict[float, tuple[_Events, list]] = {}

    def run(self, thr: float) -> tuple[_Events, list]:
        if thr in self._cache:
            return self._cache[thr]
        kind, scene, dist, score = [], [], [], []
        vel_pairs = []
        for si, frames in enumerate(self.scenes):
            id_map: dict = {}
            for fd in frames:
                keep = fd.pr_score >= thr
                pr_ids = fd.pr_ids[keep].tolist()
                pr_xy, pr_dist, pr_score, pr_vel = fd.pr_xy[keep], fd.pr_dist[keep], fd.pr_score[keep], fd.pr_vel[keep]
                pairs, switched, id_map = _match_core(fd.gt_ids, fd.gt_xy, pr_ids, pr_xy, id_map, self.gate)
                mg = {g for g, _ in pairs}
                mp = {p for _, p in pairs}
                for g, p in pairs:
                    kind.append(_TP); scene.append(si); dist.append(fd.gt_dist[g]); score.append(pr_score[p])
                    vel_pairs.append((pr_vel[p], fd.gt_vel[g]))
                for g in switched:
                    kind.append(_IDS); scene.append(si); dist.append(fd.gt_dist[g]); score.append(np.nan)
                for g in range(len(fd.gt_ids)):
                    if g not in mg:
                        kind.append(_FN); scene.append(si); dist.append(fd.gt_dist[g]); score.append(np.nan)
                for p in range(len(pr_ids)):
                    if p not in mp:
                        kind.append(_FP); scene.append(si); dist.append(pr_dist[p]); score.append(pr_score[p])
        ev = _Events(np.array(kind, dtype=int), np.array(scene, dtype=int), np.array(dist, dtype=float),
                     np.array(score, dtype=float))
        self._cache[thr] = (ev, vel_pairs)
        return self._cache[thr]

    def group(self, select: Callable[[_Events], np.ndarray], n: int) -> GroupMetrics:
        base, _ = self.run(-np.inf)
        m0 = select(base)
        P = int(np.sum(m0 & ((base.kind == _TP) | (base.kind == _FN))))
        if P == 0:
            c = base.count(m0)
            return GroupMetrics(amota=0.0, positives=0, tp=0, fp=c.fp, fn=0, ids=0, motar=[])
        tp_scores = np.sort(base.score[m0 & (base.kind == _TP)])[::-1]
        motars = []
        best = (-np.inf, base.count(m0))
        for r in recall_points(n):
            k = math.ceil(r * P - 1e-9)
            if k > len(tp_scores):
                motars.append(0.0)
                continue
            ev, _ = self.run(float(tp_scores[k - 1]))
            c = ev.count(select(ev))
            achieved = c.tp / P
            m = motar(c.ids, c.fp, c.fn, min(achieved, 1.0), P) if achieved > 0 else 0.0
            motars.append(m)
            mota = 1.0 - (c.ids + c.fp + c.fn) / P
            if mota > best[0]:
                best = (mota, c)
        c = best[1]
        return GroupMetrics(amota=float(np.mean(motars)), positives=P, tp=c.tp, fp=c.fp, fn=c.fn, ids=c.ids,
                            motar=motars)


def _frame_arrays(gts, preds, ego_xy) -> _FrameData:
    gt_xy = np.array([g.box.center[:2] for g in gts], dtype=float).reshape(-1, 2)
    pr_xy = np.array([p.box.center[:2] for p in preds], dtype=float).reshape(-1, 2)
    return _FrameData(
        gt_ids=[g.instance_id for g in gts],
        gt_xy=gt_xy,
        gt_dist=np.hypot(*(gt_xy - ego_xy).T) if len(gts) else np.zeros(0),
        gt_vel=np.array([g.box.velocity for g in gts], dtype=float).reshape(-1, 2),
        pr_ids=np.array([p.track_id for p in preds], dtype=object),
        pr_xy=pr_xy,
        pr_dist=np.hypot(*(pr_xy - ego_xy).T) if len(preds) else np.zeros(0),
        pr_score=np.array([p.score for p in preds], dtype=float),
        pr_vel=np.array([p.velocity for p in preds], dtype=float).reshape(-1, 2),
    )


def _build_evaluators(runs: Sequence[tuple[Scenario, Sequence[TrackOutput]]], cfg: EvalConfig):
    classes: set[str] = set()
    for scene, outputs in runs:
        for fr in scene.frames:
            if fr.gt is None:
                raise SchemaMismatch(f"scene {scene.scene_id} frame {fr.frame_id} has no ground truth")
            classes.update(g.cls for g in fr.gt)
        classes.update(o.cls for o in outputs)
    per_class: dict[str, list[list[_FrameData]]] = {c: [] for c in sorted(classes)}
    for scene, outputs in runs:
        frame_ids = {fr.frame_id for fr in scene.frames}
        by_frame: dict[str, list[TrackOutput]] = defaultdict(list)
        seen = set()
        for o in outputs:
            if o.frame_id not in frame_ids:
                raise SchemaMismatch(f"output references unknown frame {o.frame_id!r} of scene {scene.scene_id}")
            if (o.frame_id, o.track_id) in seen:
                raise SchemaMismatch(f"duplicate output for frame {o.frame_id!r} track {o.track_id}")
            seen.add((o.frame_id, o.track_id))
            by_frame[o.frame_id].append(o)
        for c in per_class:
            cap = cfg.range_cap(c)
            frames = []
            for fr in scene.frames:
                ego_xy = fr.ego.position[:2]
                within = lambda b: cap is None or np.hypot(*(b.center[:2] - ego_xy)) <= cap  # noqa: E731
                gts = [g for g in fr.gt if g.cls == c and within(g.box)]
                preds = [o for o in by_frame.get(fr.frame_id, []) if o.cls == c and within(o.box)]
                frames.append(_frame_arrays(gts, preds, ego_xy))
            per_class[c].append(frames)
    return {c: _ClassEvaluator(s, cfg.dist_gate) for c, s in per_class.items()}


def _aggregate(groups: dict[str, GroupMetrics], n: int) -> GroupMetrics:
    valid = [g for g in groups.values() if g.positives > 0]
    return GroupMetrics(
        amota=float(np.mean([g.amota for g in valid])) if valid else 0.0,
        positives=sum(g.positives for g in valid),
        tp=sum(g.tp for g in groups.values()),
        fp=sum(g.fp for g in groups.values()),
        fn=sum(g.fn for g in groups.values()),
        ids=sum(g.ids for g in groups.values()),
    )


def evaluate(runs: Sequence[tuple[Scenario, Sequence[TrackOutput]]], cfg: EvalConfig | None = None,
             by_range: bool = False, by_condition: bool = False) -> MetricsReport:
    """Evaluate tracker outputs against the ground truth carried by each scene."""
    cfg = cfg or EvalConfig()
    evaluators = _build_evaluators(runs, cfg)
    n = cfg.n_recall
    everything = lambda ev: np.ones(len(ev.kind), dtype=bool)  # noqa: E731
    per_class = {c: e.group(everything, n) for c, e in evaluators.items()}
    total = _aggregate(per_class, n)

    ranges: dict[str, GroupMetrics] = {}
    if by_range:
        for lo, hi in cfg.range_bins:
            sel = lambda ev, lo=lo, hi=hi: (ev.dist >= lo) & (ev.dist < hi)  # noqa: E731
            ranges[range_bin_label(lo, hi)] = _aggregate({c: e.group(sel, n) for c, e in evaluators.items()}, n)

    conditions: dict[str, GroupMetrics] = {}
    if by_condition:
        labels: dict[str, list[int]] = defaultdict(list)
        for si, (scene, _) in enumerate(runs):
            for key in cfg.condition_tags:
                if key in scene.conditions:
                    labels[f"{key}={scene.conditions[key]}"].append(si)
        for label in sorted(labels):
            members = np.array(labels[label])
            sel = lambda ev, members=members: np.isin(ev.scene, members)  # noqa: E731
            conditions[label] = _aggregate({c: e.group(sel, n) for c, e in evaluators.items()}, n)

    return MetricsReport(
        amota=total.amota, tp=total.tp, fp=total.fp, fn=total.fn, ids=total.ids,
        per_class=per_class, by_range=ranges, by_condition=conditions, n_recall=n,
    )


def count_events(runs, cfg: EvalConfig | None = None, threshold: float = -np.inf,
                 dist_range: tuple[float, float] | None = None) -> FrameCounts:
    """Raw TP/FP/FN/IDS at a fixed score threshold, optionally restricted to a distance band."""
    cfg = cfg or EvalConfig()
    total = FrameCounts()
    for e in _build_evaluators(runs, cfg).values():
        ev, _ = e.run(threshold)
        mask = np.ones(len(ev.kind), dtype=bool)
        if dist_range is not None:
            mask = (ev.dist >= dist_range[0]) & (ev.dist < dist_range[1])
        total += ev.count(mask)
    return total


def velocity_rmse(runs, cfg: EvalConfig | None = None) -> tuple[float, int]:
    """RMSE of tracked planar velocity over all TP pairs of the unthresholded run."""
    cfg = cfg or EvalConfig()
    sq = []
    for e in _build_evaluators(runs, cfg).values():
        _, pairs = e.run(-np.inf)
        sq.extend(float(np.sum((vp - vg) ** 2)) for vp, vg in pairs)
    if not sq:
        return float("nan"), 0
    return math.sqrt(float(np.mean(sq))), len(sq)
