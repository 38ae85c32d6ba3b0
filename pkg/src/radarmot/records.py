"""Plain records shared across modules: detections, tracks, outputs, ground truth."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .geom import Box3D
from .kalman import KfState
from .radar_prep import EgoState, RadarCloud, SweepBundle


class TrackStatus(str, enum.Enum):
    TENTATIVE = "Tentative"
    CONFIRMED = "Confirmed"
    DEAD = "Dead"


class Provenance(str, enum.Enum):
    DETECTION = "Detection"
    RADAR = "Radar"


@dataclass(frozen=True, eq=False)
class Detection:
    box: Box3D
    score: float
    cls: str

    def __eq__(self, other) -> bool:
        if not isinstance(other, Detection):
            return NotImplemented
        return self.box == other.box and self.score == other.score and self.cls == other.cls

    __hash__ = None

    @property
    def center_xy(self) -> np.ndarray:
        return self.box.center[:2]

    @property
    def speed(self) -> float:
        return float(np.hypot(*self.box.velocity))


@dataclass(frozen=True, eq=False)
class GtBox:
    instance_id: str
    cls: str
    box: Box3D

    def __eq__(self, other) -> bool:
        if not isinstance(other, GtBox):
            return NotImplemented
        return self.instance_id == other.instance_id and self.cls == other.cls and self.box == other.box

    __hash__ = None


@dataclass
class Track:
    """Mutable tracker-side object; the filter state itself is immutable."""

    id: int
    cls: str
    state: KfState
    box: Box3D
    prev_center: np.ndarray
    hits: int = 1
    misses: int = 0
    status: TrackStatus = TrackStatus.TENTATIVE
    score: float = 0.0
    last_seen_by: Provenance = Provenance.DETECTION

    @property
    def velocity(self) -> np.ndarray:
        return self.state.velocity

    @property
    def speed(self) -> float:
        return self.state.speed

    def current_box(self) -> Box3D:
        """Box at the filter's current position and velocity."""
        c = np.array([self.state.x[0], self.state.x[1], self.box.center[2]])
        return Box3D(c, self.box.extents, self.box.yaw, self.state.velocity)


@dataclass(frozen=True, eq=False)
class TrackOutput:
    frame_id: str
    track_id: int
    cls: str
    box: Box3D
    velocity: np.ndarray
    score: float
    provenance: Provenance

    def __post_init__(self):
        v = np.array(self.velocity, dtype=float).reshape(2)
        v.setflags(write=False)
        object.__setattr__(self, "velocity", v)
        object.__setattr__(self, "provenance", Provenance(self.provenance))

    def __eq__(self, other) -> bool:
        if not isinstance(other, TrackOutput):
            return NotImplemented
        return (
            self.frame_id == other.frame_id
            and self.track_id == other.track_id
            and self.cls == other.cls
            and self.box == other.box
            and np.array_equal(self.velocity, other.velocity)
            and self.score == other.score
            and self.provenance == other.provenance
        )

    __hash__ = None


@dataclass(eq=False)
class Frame:
    """One keyframe of input: detections, radar and optional ground truth.

    ``radar`` is either the raw sweeps to aggregate or an already
    compensated point set.
    """

    frame_id: str
    t: float
    ego: EgoState
    detections: list[Detection] = field(default_factory=list)
    radar: SweepBundle | RadarCloud | None = None
    gt: list[GtBox] | None = None


@dataclass(eq=False)
class Scenario:
    scene_id: str
    frames: list[Frame]
    conditions: dict[str, str] = field(default_factory=dict)
    extrinsics: dict = field(default_factory=dict)
