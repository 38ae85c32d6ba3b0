"""Rigid transforms, planar oriented boxes and line-of-sight projections.

Conventions: right-handed frames, z up, yaw measured counter-clockwise from +x.
A :class:`Pose` maps points from a child frame into its parent frame,
``p_parent = R @ p_child + t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DegenerateBearing, InvalidBox, InvalidFactor, InvalidPose

EPS_POS = 1e-6
_ORTHO_TOL = 1e-9


def wrap_angle(a: float) -> float:
    """Normalize an angle into (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    elif a > math.pi:
        a -= 2.0 * math.pi
    return a


def rot_z(yaw: float) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform ``child -> parent``."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float).reshape(3, 3)
        t = np.array(self.translation, dtype=float).reshape(3)
        if not np.all(np.isfinite(R)) or not np.all(np.isfinite(t)):
            raise InvalidPose("pose contains non-finite values")
        if np.max(np.abs(R.T @ R - np.eye(3))) > _ORTHO_TOL:
            raise InvalidPose("rotation is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > _ORTHO_TOL:
            raise InvalidPose("rotation has det != +1")
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> Pose:
        return cls()

    @classmethod
    def from_yaw(cls, yaw: float, translation=(0.0, 0.0, 0.0)) -> Pose:
        return cls(rot_z(yaw), np.asarray(translation, dtype=float))

    @property
    def yaw(self) -> float:
        return math.atan2(self.rotation[1, 0], self.rotation[0, 0])

    def inverse(self) -> Pose:
        Rt = self.rotation.T
        return Pose(Rt, -Rt @ self.translation)

    def compose(self, other: Pose) -> Pose:
        """Return ``self ∘ other``: apply *other* first, then *self*."""
        return Pose(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)

    def __matmul__(self, other: Pose) -> Pose:
        return self.compose(other)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform a single point (3,) or a batch (N, 3)."""
        points = np.asarray(points, dtype=float)
        return points @ self.rotation.T + self.translation

    def allclose(self, other: Pose, atol: float = 1e-9) -> bool:
        return bool(
            np.allclose(self.rotation, other.rotation, rtol=0.0, atol=atol)
            and np.allclose(self.translation, other.translation, rtol=0.0, atol=atol)
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, Pose):
            return NotImplemented
        return bool(np.array_equal(self.rotation, other.rotation) and np.array_equal(self.translation, other.translation))

    __hash__ = None


def transform_point(pose: Pose, p) -> np.ndarray:
    return pose.apply(p)


@dataclass(frozen=True, eq=False)
class Box3D:
    """Yaw-only oriented box in the global frame.

    ``extents`` is (length, width, height); length lies along the heading.
    """

    center: np.ndarray
    extents: np.ndarray
    yaw: float = 0.0
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        c = np.array(self.center, dtype=float).reshape(3)
        e = np.array(self.extents, dtype=float).reshape(3)
        v = np.array(self.velocity, dtype=float).reshape(2)
        if not np.all(e > 0):
            raise InvalidBox(f"extents must be strictly positive, got {e.tolist()}")
        for a in (c, e, v):
            a.setflags(write=False)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "extents", e)
        object.__setattr__(self, "velocity", v)
        object.__setattr__(self, "yaw", wrap_angle(float(self.yaw)))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Box3D):
            return NotImplemented
        return (
            np.array_equal(self.center, other.center)
            and np.array_equal(self.extents, other.extents)
            and self.yaw == other.yaw
            and np.array_equal(self.velocity, other.velocity)
        )

    __hash__ = None


def bearing(p_sensor) -> np.ndarray:
    """Unit line-of-sight vector from the sensor origin to ``p_sensor``."""
    p = np.asarray(p_sensor, dtype=float)
    n = float(np.linalg.norm(p))
    if n <= EPS_POS:
        raise DegenerateBearing(f"point at {p.tolist()} is within {EPS_POS} m of the sensor")
    return p / n


def bearings(p_sensor: np.ndarray) -> np.ndarray:
    """Row-wise :func:`bearing` for an (N, 3) array."""
    p = np.asarray(p_sensor, dtype=float).reshape(-1, 3)
    n = np.linalg.norm(p, axis=1)
    if np.any(n <= EPS_POS):
        raise DegenerateBearing("radar return within EPS_POS of its sensor")
    return p / n[:, None]


def inflate_box_xy(box: Box3D, factor: float) -> Box3D:
    if not factor > 0:
        raise InvalidFactor(f"inflation factor must be > 0, got {factor}")
    e = box.extents.copy()
    e[:2] *= factor
    return replace(box, extents=e)


def points_in_box_xy(points: np.ndarray, box: Box3D) -> np.ndarray:
    """Boolean mask of (N, >=2) points whose XY lies inside the box footprint."""
    pts = np.asarray(points, dtype=float).reshape(-1, np.shape(points)[-1])
    d = pts[:, :2] - box.center[:2]
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    # rotate by -yaw into the box frame
    lx = c * d[:, 0] + s * d[:, 1]
    ly = -s * d[:, 0] + c * d[:, 1]
    return (np.abs(lx) <= box.extents[0] / 2) & (np.abs(ly) <= box.extents[1] / 2)


def point_in_box_xy(p, box: Box3D) -> bool:
    return bool(points_in_box_xy(np.asarray(p, dtype=float)[None, :], box)[0])


def project_velocity_los(v_xy, b, rot_global_to_sensor) -> float:
    """Planar velocity projected on a sensor-frame line of sight.

    Computes ``b^T R[:, :2] v`` where ``R`` rotates global vectors into the sensor frame.
    """
    R = np.asarray(rot_global_to_sensor, dtype=float)
    return float(np.asarray(b, dtype=float) @ R[:, :2] @ np.asarray(v_xy, dtype=float))
