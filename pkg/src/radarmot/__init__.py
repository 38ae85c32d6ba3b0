"""Radar-assisted 3D multi-object tracking: Doppler-compensated radar points
refine Kalman velocity estimates and recover objects the detector missed."""

from .assoc import AssocConfig, match_stage1, radar_associate
from .errors import RadarMotError
from .geom import Box3D, Pose
from .metrics import EvalConfig, MetricsReport, evaluate
from .radar_prep import EgoState, RadarCloud, RadarPoint, Sweep, SweepBundle, aggregate_sweeps
from .records import Detection, Frame, GtBox, Provenance, Scenario, Track, TrackOutput, TrackStatus
from .simgen import ScenarioConfig, generate
from .tracker import FilterConfig, LifecycleConfig, Tracker, TrackerConfig, run_scene

__version__ = "0.1.0"

__all__ = [
    "AssocConfig", "Box3D", "Detection", "EgoState", "EvalConfig", "FilterConfig", "Frame", "GtBox",
    "LifecycleConfig", "MetricsReport", "Pose", "Provenance", "RadarCloud", "RadarMotError", "RadarPoint",
    "Scenario", "ScenarioConfig", "Sweep", "SweepBundle", "Track", "TrackOutput", "TrackStatus", "Tracker",
    "TrackerConfig", "aggregate_sweeps", "evaluate", "generate", "match_stage1", "radar_associate", "run_scene",
]
