"""Planar constant-velocity Kalman filter with box-position and radar Doppler channels.

State is ``[x, y, vx, vy]`` in the global frame. A radar return contributes a
scalar measurement of the track velocity projected on its line of sight, so
its observation row has zeros in the position columns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyPointSet, NegativeDt, SingularInnovationCovariance
from .radar_prep import RadarCloud, RadarPoint

RCOND_MIN = 1e-12
H_DET = np.hstack([np.eye(2), np.zeros((2, 2))])


@dataclass(frozen=True, eq=False)
class KfState:
    x: np.ndarray
    P: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        x = np.array(self.x, dtype=float).reshape(4)
        P = np.array(self.P, dtype=float).reshape(4, 4)
        x.setflags(write=False)
        P.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "P", P)

    @property
    def position(self) -> np.ndarray:
        return self.x[:2]

    @property
    def velocity(self) -> np.ndarray:
        return self.x[2:]

    @property
    def speed(self) -> float:
        return float(np.hypot(self.x[2], self.x[3]))


@dataclass(frozen=True)
class ProcessModel:
    """White-acceleration CV model; ``q_accel`` is the acceleration variance in (m/s^2)^2."""

    q_accel: float = 1.0

    def F(self, dt: float) -> np.ndarray:
        F = np.eye(4)
        F[0, 2] = F[1, 3] = dt
        return F

    def Q(self, dt: float) -> np.ndarray:
        g = np.array([0.5 * dt * dt, dt])
        block = self.q_accel * np.outer(g, g)
        Q = np.zeros((4, 4))
        for axis in (0, 1):
            idx = [axis, axis + 2]
            Q[np.ix_(idx, idx)] = block
        return Q


@dataclass(frozen=True, eq=False)
class DetectionObservation:
    z: np.ndarray
    R_det: np.ndarray


@dataclass(frozen=True, eq=False)
class RadarObservation:
    z: np.ndarray
    H: np.ndarray
    R: np.ndarray
    points: RadarCloud

    def __len__(self) -> int:
        return len(self.z)


def predict(state: KfState, model: ProcessModel, dt: float) -> KfState:
    if dt < 0:
        raise NegativeDt(f"dt must be >= 0, got {dt}")
    if dt == 0:
        return KfState(state.x, state.P, state.t)
    F = model.F(dt)
    P = F @ state.P @ F.T + model.Q(dt)
    return KfState(F @ state.x, 0.5 * (P + P.T), state.t + dt)


def _linear_update(state: KfState, z: np.ndarray, H: np.ndarray, R: np.ndarray) -> tuple[KfState, np.ndarray, np.ndarray]:
    """Joseph-form update. Returns the posterior, innovation and innovation covariance."""
    P = state.P
    S = H @ P @ H.T + R
    S = 0.5 * (S + S.T)
    if not np.all(np.isfinite(S)) or 1.0 / np.linalg.cond(S) < RCOND_MIN:
        raise SingularInnovationCovariance("innovation covariance is singular or ill-conditioned")
    nu = z - H @ state.x
    K = np.linalg.solve(S, H @ P).T
    IKH = np.eye(4) - K @ H
    P_post = IKH @ P @ IKH.T + K @ R @ K.T
    return KfState(state.x + K @ nu, 0.5 * (P_post + P_post.T), state.t), nu, S


def update_detection(state: KfState, obs: DetectionObservation) -> KfState:
    return _linear_update(state, np.asarray(obs.z, dtype=float), H_DET, np.asarray(obs.R_det, dtype=float))[0]


def _as_cloud(points) -> RadarCloud:
    if isinstance(points, RadarCloud):
        return points
    points = list(points)
    if points and not isinstance(points[0], RadarPoint):
        raise TypeError("expected RadarPoint instances or a RadarCloud")
    return RadarCloud.from_points(points)


def build_radar_observation(track_state: KfState, points, sigma_radial: float) -> RadarObservation:
    """Stack one line-of-sight row per radar point.

    Row ``i`` is ``[0, 0, b_i^T R_i[:, :2]]`` with ``R_i`` the point's
    global-to-sensor rotation; ``z_i`` is its compensated radial velocity.
    ``track_state`` is accepted for interface symmetry; rows do not depend on it.
    """
    cloud = _as_cloud(points)
    m = len(cloud)
    if m == 0:
        raise EmptyPointSet("radar observation needs at least one point")
    H = np.zeros((m, 4))
    H[:, 2:] = cloud.los_xy
    return RadarObservation(
        z=cloud.v_radial.copy(),
        H=H,
        R=np.eye(m) * sigma_radial**2,
        points=cloud,
    )


def update_radar(state: KfState, obs: RadarObservation) -> KfState:
    return _linear_update(state, obs.z, obs.H, obs.R)[0]


def innovation_nis(state: KfState, z, H, R) -> float:
    """Normalized innovation squared of a measurement against a prior."""
    H = np.atleast_2d(H)
    S = H @ state.P @ H.T + np.atleast_2d(R)
    nu = np.atleast_1d(z) - H @ state.x
    return float(nu @ np.linalg.solve(S, nu))
