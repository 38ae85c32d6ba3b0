"""Synthetic experiment suites: component ablation, velocity refinement, miss recovery."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

from .assoc import AssocConfig
from .metrics import EvalConfig, FrameCounts, count_events, evaluate, velocity_rmse
from .records import Scenario, TrackOutput
from .simgen import ScenarioConfig, generate
from .tracker import LifecycleConfig, Tracker, TrackerConfig, run_scene

# Average dropout over the 0-150 m span is about 30 %.
ABLATION_SCENE = ScenarioConfig(
    dropout_base=0.15,
    dropout_per_100m=0.2,
    det_sigma_pos=0.3,
    det_sigma_vel=1.0,
    radar_sigma=0.3,
)
ABLATION_SEEDS = tuple(range(20))

# Tracker settings shared by all experiments: module defaults except a wider
# Doppler gate. Right after birth the predicted radial velocity is off by about
# the detector's velocity noise (1 m/s), and a gate of the same width keeps
# mostly the returns that agree with the wrong prediction.
EXPERIMENT_TRACKER = TrackerConfig(assoc=AssocConfig(delta_v=3.0))

# rows of the ablation table; each adds one component to the row above
ABLATION_ROWS: tuple[tuple[str, dict], ...] = (
    ("baseline", dict(radar_kf=False, radar_assoc=False, cross_check=False)),
    ("+radar KF", dict(radar_kf=True, radar_assoc=False, cross_check=False)),
    ("+radar assoc", dict(radar_kf=True, radar_assoc=True, cross_check=False)),
    ("+cross-check", dict(radar_kf=True, radar_assoc=True, cross_check=True)),
)


@dataclass
class AblationRow:
    name: str
    amota: float
    tp: int
    fp: int
    fn: int
    ids: int
    raw: FrameCounts


def make_suite(base: ScenarioConfig = ABLATION_SCENE, seeds: Sequence[int] = ABLATION_SEEDS) -> list[Scenario]:
    return [generate(replace(base, seed=s)) for s in seeds]


def _track(args) -> list[TrackOutput]:
    return run_scene(*args)


def track_suite(scenes: Sequence[Scenario], cfg: TrackerConfig, workers: int = 1) -> list[list[TrackOutput]]:
    """Track every scene independently; results keep scene order regardless of ``workers``."""
    jobs = [(s, cfg) for s in scenes]
    if workers <= 1:
        return [_track(j) for j in jobs]
    with ProcessPoolExecutor(workers) as ex:
        return list(ex.map(_track, jobs))


def run_ablation(scenes: Sequence[Scenario], base: TrackerConfig | None = None,
                 eval_cfg: EvalConfig | None = None, workers: int = 1) -> list[AblationRow]:
    base = base or EXPERIMENT_TRACKER
    eval_cfg = eval_cfg or EvalConfig()
    rows = []
    for name, flags in ABLATION_ROWS:
        outs = track_suite(scenes, base.ablated(**flags), workers)
        runs = list(zip(scenes, outs))
        rep = evaluate(runs, eval_cfg)
        rows.append(AblationRow(name, rep.amota, rep.tp, rep.fp, rep.fn, rep.ids, count_events(runs, eval_cfg)))
    return rows


def format_ablation(rows: Sequence[AblationRow]) -> str:
    lines = [f"{'':<16}{'AMOTA%':>8}{'TP':>8}{'FP':>8}{'FN':>8}{'IDS':>8}   | all-scores TP/FP/FN/IDS"]
    for r in rows:
        c = r.raw
        lines.append(f"{r.name:<16}{100 * r.amota:>8.2f}{r.tp:>8}{r.fp:>8}{r.fn:>8}{r.ids:>8}   | "
                     f"{c.tp}/{c.fp}/{c.fn}/{c.ids}")
    return "\n".join(lines)


# --- velocity refinement ------------------------------------------------------------

# same suite as the ablation; listed separately for the two noise levels it depends on
VELOCITY_SCENE = replace(ABLATION_SCENE, det_sigma_vel=1.0, radar_sigma=0.3)


def velocity_experiment(scenes: Sequence[Scenario], base: TrackerConfig | None = None,
                        eval_cfg: EvalConfig | None = None) -> tuple[float, float]:
    """Tracked-velocity RMSE (with radar KF, without radar KF) over all matched pairs."""
    base = base or EXPERIMENT_TRACKER
    on = velocity_rmse(list(zip(scenes, track_suite(scenes, base.ablated(radar_kf=True)))), eval_cfg)[0]
    off = velocity_rmse(list(zip(scenes, track_suite(scenes, base.ablated(radar_kf=False)))), eval_cfg)[0]
    return on, off


# --- scripted detector blackout ---------------------------------------------------

BLACKOUT_OBJECT = 0
BLACKOUT_FIRST = 10
BLACKOUT_LEN = 3

BLACKOUT_SCENE = ScenarioConfig(
    seed=11,
    duration_s=12.0,
    n_objects={"car": 1},
    spawn_x_range=(30.0, 40.0),
    rel_speed_range=(-2.0, 2.0),
    oncoming_fraction=0.0,
    dropout_base=0.0,
    dropout_per_100m=0.0,
    false_det_rate=0.0,
    radar_points_base=6.0,
    blackouts=((BLACKOUT_OBJECT, BLACKOUT_FIRST, BLACKOUT_LEN),),
)

# With the default tolerance of three misses a three-frame blackout is survived
# by coasting alone, so the recovery check tightens it to two.
BLACKOUT_LIFECYCLE = LifecycleConfig(max_misses_confirmed=2)


@dataclass
class BlackoutResult:
    survived: bool
    radar_frames: list[str]
    track_ids: list[int]


def blackout_experiment(radar_assoc: bool = True, scene_cfg: ScenarioConfig = BLACKOUT_SCENE,
                        lifecycle: LifecycleConfig = BLACKOUT_LIFECYCLE) -> BlackoutResult:
    """Run the blackout scene and report whether the object's first track lives through it."""
    scene = generate(scene_cfg)
    cfg = replace(EXPERIMENT_TRACKER, lifecycle=lifecycle).ablated(radar_assoc=radar_assoc)
    tracker = Tracker(cfg)
    per_frame = []
    for fr in scene.frames:
        per_frame.append((fr.frame_id, tracker.step(fr)))
    first = {o.track_id for _, outs in per_frame[:BLACKOUT_FIRST] for o in outs}
    track_ids = sorted(first)
    if len(first) != 1:
        return BlackoutResult(False, [], track_ids)
    tid = next(iter(first))
    window = per_frame[BLACKOUT_FIRST:BLACKOUT_FIRST + BLACKOUT_LEN]
    radar_frames = [fid for fid, outs in window for o in outs if o.track_id == tid and o.provenance.value == "Radar"]
    after = per_frame[BLACKOUT_FIRST + BLACKOUT_LEN:]
    survived = any(o.track_id == tid for _, outs in after for o in outs)
    return BlackoutResult(survived, radar_frames, sorted({o.track_id for _, outs in per_frame for o in outs}))
