"""JSON-lines scene/result files, metrics reports, and the flat key=value config.

Scene file (``radarmot-scene`` v1): the first line is a header
``{"format": "radarmot-scene", "version": 1, "scene_id", "conditions", "sensors"}``
and every following line is a frame record. Result file
(``radarmot-results`` v1): a header line followed by one TrackOutput per line.
All units are SI; angles are radians; rotations are 3x3 row-major nested lists.
See docs/formats.md for the full field list.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np

from .assoc import AssocConfig
from .errors import (
    InvalidConfig,
    InvalidBox,
    InvalidPose,
    IoError,
    NonMonotonicTime,
    RadarMotError,
    SchemaMismatch,
    VersionUnsupported,
)
from .geom import Box3D, Pose
from .metrics import EvalConfig, MetricsReport, range_bin_label
from .radar_prep import EgoState, RadarCloud, Sweep, SweepBundle
from .records import Detection, Frame, GtBox, Provenance, Scenario, TrackOutput
from .simgen import ScenarioConfig
from .tracker import FilterConfig, LifecycleConfig, TrackerConfig

SCENE_FORMAT = "radarmot-scene"
RESULTS_FORMAT = "radarmot-results"
REPORT_FORMAT = "radarmot-report"
VERSION = 1


# --- encoding helpers -----------------------------------------------------------


def _vec(a) -> list[float]:
    return [float(x) for x in np.asarray(a, dtype=float).reshape(-1)]


def _mat(a) -> list[list[float]]:
    return [[float(x) for x in row] for row in np.asarray(a, dtype=float).reshape(3, 3)]


def _pose_json(p: Pose) -> dict:
    return {"rotation": _mat(p.rotation), "translation": _vec(p.translation)}


def _pose(d: Mapping) -> Pose:
    return Pose(np.array(d["rotation"], dtype=float), np.array(d["translation"], dtype=float))


def _ego_json(e: EgoState) -> dict:
    return {
        **_pose_json(e.pose),
        "v_ego": _vec(e.v_ego),
        "omega_ego": _vec(e.omega_ego),
        "rotation_center": _vec(e.rotation_center),
    }


def _ego(d: Mapping) -> EgoState:
    return EgoState(
        _pose(d),
        np.array(d.get("v_ego", [0, 0, 0]), dtype=float),
        np.array(d.get("omega_ego", [0, 0, 0]), dtype=float),
        np.array(d.get("rotation_center", [0, 0, 0]), dtype=float),
    )


def _box_json(b: Box3D) -> dict:
    return {"center": _vec(b.center), "extents": _vec(b.extents), "yaw": float(b.yaw), "velocity": _vec(b.velocity)}


def _box(d: Mapping, velocity=None) -> Box3D:
    v = d.get("velocity", [0.0, 0.0]) if velocity is None else velocity
    return Box3D(np.array(d["center"], dtype=float), np.array(d["extents"], dtype=float), float(d["yaw"]),
                 np.array(v, dtype=float))


def _cloud_json(c: RadarCloud) -> list[dict]:
    return [
        {
            "p_global": _vec(c.p_global[i]),
            "bearing": _vec(c.bearing[i]),
            "v_radial": float(c.v_radial[i]),
            "v_rel": _vec(c.v_rel[i]),
            "v_comp": _vec(c.v_comp[i]),
            "p_sensor": _vec(c.p_sensor[i]),
            "t_sweep": float(c.t_sweep[i]),
            "sensor_id": str(c.sensor_id[i]),
            "sensor_pose": _pose_json(Pose(c.sensor_rot[i], c.sensor_trans[i])),
        }
        for i in range(len(c))
    ]


def _cloud(rows: list[Mapping]) -> RadarCloud:
    if not rows:
        return RadarCloud.empty()
    poses = [_pose(r["sensor_pose"]) for r in rows]
    return RadarCloud(
        p_global=[r["p_global"] for r in rows],
        bearing=[r["bearing"] for r in rows],
        v_radial=[r["v_radial"] for r in rows],
        v_rel=[r["v_rel"] for r in rows],
        v_comp=[r["v_comp"] for r in rows],
        p_sensor=[r["p_sensor"] for r in rows],
        t_sweep=[r["t_sweep"] for r in rows],
        sensor_id=np.array([str(r["sensor_id"]) for r in rows], dtype=object),
        sensor_rot=np.stack([p.rotation for p in poses]),
        sensor_trans=np.stack([p.translation for p in poses]),
    )


def _frame_json(fr: Frame) -> dict:
    rec: dict[str, Any] = {
        "type": "frame",
        "frame_id": fr.frame_id,
        "t": float(fr.t),
        "ego": _ego_json(fr.ego),
        "detections": [{**_box_json(d.box), "score": float(d.score), "class": d.cls} for d in fr.detections],
    }
    if isinstance(fr.radar, SweepBundle):
        rec["sweeps"] = [
            {
                "t": float(s.t),
                "ego": None if s.ego is None else _ego_json(s.ego),
                "points": [[str(sid), *_vec(p), *_vec(v)] for sid, p, v in zip(s.sensor_ids, s.p_sensor, s.v_rel)],
            }
            for s in fr.radar.sweeps
        ]
    elif isinstance(fr.radar, RadarCloud):
        rec["radar_points"] = _cloud_json(fr.radar)
    if fr.gt is not None:
        rec["gt"] = [{"instance_id": g.instance_id, "class": g.cls, **_box_json(g.box)} for g in fr.gt]
    return rec


def _dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def _write_lines(path, records: Iterable[dict]) -> None:
    try:
        with open(path, "w", encoding="utf-8") as f:
            for rec in records:
                f.write(_dumps(rec))
                f.write("\n")
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e


def _read_lines(path) -> list[tuple[int, dict]]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise SchemaMismatch(f"invalid JSON: {e.msg}", lineno) from None
        if not isinstance(rec, dict):
            raise SchemaMismatch("record is not a JSON object", lineno)
        out.append((lineno, rec))
    if not out:
        raise SchemaMismatch("file is empty, header record missing", 1)
    return out


def _check_header(lineno: int, rec: Mapping, fmt: str) -> None:
    if rec.get("format") != fmt:
        raise SchemaMismatch(f"expected header with format {fmt!r}, got {rec.get('format')!r}", lineno)
    if rec.get("version") != VERSION:
        raise VersionUnsupported(f"{fmt} version {rec.get('version')!r} is not supported (expected {VERSION})", lineno)


# --- scenes -------------------------------------------------------------------------


def write_scene(path, scene: Scenario) -> None:
    extr = dict(scene.extrinsics)
    for fr in scene.frames:
        if isinstance(fr.radar, SweepBundle):
            extr.update(fr.radar.extrinsics)
    header = {
        "format": SCENE_FORMAT,
        "version": VERSION,
        "scene_id": scene.scene_id,
        "conditions": dict(scene.conditions),
        "sensors": {sid: _pose_json(p) for sid, p in sorted(extr.items())},
    }
    _write_lines(path, [header, *(_frame_json(fr) for fr in scene.frames)])


def parse_scene(path) -> Scenario:
    lines = _read_lines(path)
    hline, header = lines[0]
    _check_header(hline, header, SCENE_FORMAT)
    try:
        extrinsics = {str(k): _pose(v) for k, v in header.get("sensors", {}).items()}
        conditions = {str(k): str(v) for k, v in header.get("conditions", {}).items()}
        scene_id = str(header.get("scene_id", Path(path).stem))
    except (KeyError, TypeError, ValueError, AttributeError, RadarMotError) as e:
        raise SchemaMismatch(f"malformed header: {e}", hline) from None

    frames: list[Frame] = []
    seen_ids: set[str] = set()
    for lineno, rec in lines[1:]:
        if rec.get("type") != "frame":
            raise SchemaMismatch(f"unknown record type {rec.get('type')!r}", lineno)
        try:
            fr = _parse_frame(rec, extrinsics, frames[-1] if frames else None)
        except NonMonotonicTime:
            raise
        except (KeyError, TypeError, ValueError, IndexError, InvalidPose, InvalidBox, InvalidConfig) as e:
            raise SchemaMismatch(f"malformed frame record: {type(e).__name__}: {e}", lineno) from None
        if frames and not fr.t > frames[-1].t:
            raise NonMonotonicTime(f"frame {fr.frame_id!r} at t={fr.t} does not follow t={frames[-1].t}", lineno)
        if fr.frame_id in seen_ids:
            raise SchemaMismatch(f"duplicate frame id {fr.frame_id!r}", lineno)
        seen_ids.add(fr.frame_id)
        frames.append(fr)
    return Scenario(scene_id, frames, conditions, extrinsics)


def _parse_frame(rec: Mapping, extrinsics: dict[str, Pose], prev: Frame | None) -> Frame:
    t = float(rec["t"])
    if not math.isfinite(t):
        raise ValueError("non-finite timestamp")
    ego = _ego(rec["ego"])
    dets = [Detection(_box(d), float(d["score"]), str(d["class"])) for d in rec.get("detections", [])]
    radar: SweepBundle | RadarCloud | None = None
    if "sweeps" in rec and "radar_points" in rec:
        raise ValueError("frame carries both sweeps and radar_points")
    if "sweeps" in rec:
        sweeps = []
        for s in rec["sweeps"]:
            pts = s["points"]
            for p in pts:
                if len(p) != 7:
                    raise ValueError("radar point rows must be [sensor_id, px, py, pz, vx, vy, vz]")
                if str(p[0]) not in extrinsics:
                    raise ValueError(f"unknown sensor {p[0]!r}")
            sweeps.append(Sweep(
                float(s["t"]),
                None if s.get("ego") is None else _ego(s["ego"]),
                np.array([str(p[0]) for p in pts], dtype=object),
                np.array([p[1:4] for p in pts], dtype=float).reshape(-1, 3),
                np.array([p[4:7] for p in pts], dtype=float).reshape(-1, 3),
            ))
        prev_kf = (prev.t, prev.ego) if prev is not None else None
        radar = SweepBundle(sweeps, t, extrinsics, keyframe_ego=ego, prev_keyframe=prev_kf)
    elif "radar_points" in rec:
        radar = _cloud(rec["radar_points"])
    gt = None
    if "gt" in rec:
        gt = [GtBox(str(g["instance_id"]), str(g["class"]), _box(g)) for g in rec["gt"]]
    return Frame(str(rec["frame_id"]), t, ego, dets, radar, gt)


# --- results ------------------------------------------------------------------------


def _output_json(o: TrackOutput) -> dict:
    b = o.box
    return {
        "frame_id": o.frame_id,
        "track_id": int(o.track_id),
        "class": o.cls,
        "center": _vec(b.center),
        "extents": _vec(b.extents),
        "yaw": float(b.yaw),
        "velocity": _vec(o.velocity),
        "score": float(o.score),
        "provenance": o.provenance.value,
    }


def write_results(path, outputs: Iterable[TrackOutput], scene_id: str | None = None) -> None:
    header = {"format": RESULTS_FORMAT, "version": VERSION}
    if scene_id is not None:
        header["scene_id"] = scene_id
    _write_lines(path, [header, *(_output_json(o) for o in outputs)])


def parse_results(path, expect_scene_id: str | None = None) -> list[TrackOutput]:
    """Read a results file; with ``expect_scene_id`` a header naming another scene is rejected."""
    lines = _read_lines(path)
    _check_header(*lines[0], RESULTS_FORMAT)
    got = lines[0][1].get("scene_id")
    if expect_scene_id is not None and got is not None and got != expect_scene_id:
        raise SchemaMismatch(f"results are for scene {got!r}, not {expect_scene_id!r}", lines[0][0])
    out = []
    for lineno, rec in lines[1:]:
        try:
            out.append(TrackOutput(
                frame_id=str(rec["frame_id"]),
                track_id=int(rec["track_id"]),
                cls=str(rec["class"]),
                box=_box(rec),
                velocity=np.array(rec["velocity"], dtype=float),
                score=float(rec["score"]),
                provenance=Provenance(rec["provenance"]),
            ))
        except (KeyError, TypeError, ValueError, InvalidBox) as e:
            raise SchemaMismatch(f"malformed result record: {type(e).__name__}: {e}", lineno) from None
    return out


# --- reports ------------------------------------------------------------------------


def _pct(x: float) -> str:
    return f"{100.0 * x:.1f}"


def format_report(report: MetricsReport) -> str:
    lines = ["# Tracking evaluation", f"# {report.note}", f"# recall sampling points n = {report.n_recall}", ""]
    head = f"{'':<14}{'AMOTA%':>8}{'TP':>8}{'FP':>8}{'FN':>8}{'IDS':>8}"
    lines += ["## Overall", head]
    lines.append(f"{'Overall':<14}{_pct(report.amota):>8}{report.tp:>8}{report.fp:>8}{report.fn:>8}{report.ids:>8}")
    for cls, g in sorted(report.per_class.items()):
        am = _pct(g.amota) if g.positives else "-"
        lines.append(f"{cls:<14}{am:>8}{g.tp:>8}{g.fp:>8}{g.fn:>8}{g.ids:>8}")
    for title, groups in (("By range", report.by_range), ("By condition", report.by_condition)):
        if not groups:
            continue
        lines += ["", f"## {title}", f"{'':<24}{'AMOTA%':>8}{'IDS':>8}{'GT':>8}"]
        for label, g in groups.items():
            lines.append(f"{label:<24}{_pct(g.amota):>8}{g.ids:>8}{g.positives:>8}")
    return "\n".join(lines) + "\n"


def report_text_path(path) -> Path:
    return Path(path).with_suffix(".txt")


def write_report(path, report: MetricsReport) -> None:
    """Machine-readable JSON summary at ``path``, tables alongside with a ``.txt`` suffix."""
    doc = {"format": REPORT_FORMAT, "version": VERSION, **report.to_dict()}
    try:
        Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
        report_text_path(path).write_text(format_report(report), encoding="utf-8")
    except OSError as e:
        raise IoError(f"cannot write report {path}: {e}") from e


def read_report(path) -> MetricsReport:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise SchemaMismatch(f"report is not valid JSON: {e.msg}", e.lineno) from None
    if not isinstance(doc, dict):
        raise SchemaMismatch("report is not a JSON object", 1)
    _check_header(1, doc, REPORT_FORMAT)
    return MetricsReport.from_dict({k: v for k, v in doc.items() if k not in ("format", "version")})


# --- config -------------------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    sim: ScenarioConfig = field(default_factory=ScenarioConfig)


# section name -> path of attribute names from RunConfig
_SECTIONS = {
    "assoc": ("tracker", "assoc"),
    "lifecycle": ("tracker", "lifecycle"),
    "filter": ("tracker", "filter"),
    "tracker": ("tracker",),
    "radar": ("tracker",),
    "eval": ("eval",),
    "sim": ("sim",),
}


def _coerce(default: Any, raw: Any, key: str) -> Any:
    if isinstance(default, bool):
        if isinstance(raw, bool):
            return raw
        if isinstance(raw, int) and raw in (0, 1):
            return bool(raw)
        if isinstance(raw, str) and raw.lower() in ("true", "false", "yes", "no", "1", "0"):
            return raw.lower() in ("true", "yes", "1")
        raise InvalidConfig(f"{key}: expected a boolean, got {raw!r}")
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(raw, (int, float)) and float(raw).is_integer():
            return int(raw)
        raise InvalidConfig(f"{key}: expected an integer, got {raw!r}")
    if isinstance(default, float) or default is None and isinstance(raw, (int, float)):
        if isinstance(raw, (int, float)) and not isinstance(raw, bool):
            return float(raw)
        if default is None and raw is None:
            return None
        raise InvalidConfig(f"{key}: expected a number, got {raw!r}")
    if isinstance(default, tuple):
        if not isinstance(raw, list):
            raise InvalidConfig(f"{key}: expected a list, got {raw!r}")
        return tuple(tuple(x) if isinstance(x, list) else x for x in raw)
    if isinstance(default, Mapping):
        if not isinstance(raw, dict):
            raise InvalidConfig(f"{key}: expected an object, got {raw!r}")
        return {str(k): tuple(v) if isinstance(v, list) else v for k, v in raw.items()}
    return raw


def _set(obj, path: list[str], raw: Any, key: str):
    name = path[0]
    names = {f.name for f in fields(obj)}
    if name not in names:
        raise InvalidConfig(f"unknown config key {key!r}")
    current = getattr(obj, name)
    if len(path) > 1:
        if dataclasses.is_dataclass(current):
            return replace(obj, **{name: _set(current, path[1:], raw, key)})
        if isinstance(current, Mapping) and len(path) == 2:
            sub = dict(current)
            default = next(iter(current.values()), None) if current else None
            sub[path[1]] = _coerce(default, raw, key) if default is not None else raw
            return replace(obj, **{name: sub})
        raise InvalidConfig(f"unknown config key {key!r}")
    if dataclasses.is_dataclass(current):
        raise InvalidConfig(f"{key!r} names a section, not a value")
    return replace(obj, **{name: _coerce(current, raw, key)})


def parse_config_text(text: str, base: RunConfig | None = None) -> RunConfig:
    """Apply ``section.key=value`` lines on top of defaults.

    Values are JSON literals where they parse as such, bare strings otherwise.
    """
    cfg = base or RunConfig()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidConfig(f"config line {lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        parts = key.split(".")
        if parts[0] not in _SECTIONS or len(parts) < 2:
            raise InvalidConfig(f"config line {lineno}: unknown section in {key!r}")
        try:
            raw = json.loads(value)
        except json.JSONDecodeError:
            raw = value
        try:
            cfg = _set(cfg, [*_SECTIONS[parts[0]], *parts[1:]], raw, key)
        except TypeError as e:
            raise InvalidConfig(f"config line {lineno}: {e}") from None
    return cfg


def load_config(path) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise IoError(f"cannot read config {path}: {e}") from e
    return parse_config_text(text)


__all__ = [
    "RunConfig", "format_report", "load_config", "parse_config_text", "parse_results", "parse_scene",
    "range_bin_label", "read_report", "write_report", "write_results", "write_scene",
    "AssocConfig", "FilterConfig", "LifecycleConfig",
]
