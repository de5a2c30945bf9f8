"""Velocity adaptive cubature Kalman filter.

State layout (9 entries)::

    [x_c, y_c, w, h, v_x, v_y, w_dot, h_dot, a]

``a`` is a scalar acceleration acting along the current heading ``v / |v|``.
Below ``accel_threshold`` the motion is constant-velocity and the stored
acceleration snaps to zero; above it the acceleration is applied and then
decays exponentially.

The module also carries :class:`LinearKF`, the 8-state constant-velocity
filter used as the baseline motion model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from groupmot.errors import CovarianceNotPSD, SingularInnovation

STATE_DIM = 9
OBS_DIM = 4
JITTER = 1e-9
MIN_SPEED = 1e-6
MIN_SIZE = 1.0


@dataclass
class FilterState:
    x: np.ndarray
    P: np.ndarray

    def copy(self) -> "FilterState":
        return FilterState(self.x.copy(), self.P.copy())

    @property
    def bbox_array(self) -> np.ndarray:
        return self.x[:4].copy()

    @property
    def position(self) -> np.ndarray:
        return self.x[:2].copy()

    @property
    def velocity(self) -> np.ndarray:
        return self.x[4:6].copy()


@dataclass
class NoiseConfig:
    """Size-relative process and observation noise.

    Every standard deviation is a multiple of the current box height, as in
    the SORT family of trackers.
    """

    std_position: float = 0.05
    std_velocity: float = 0.00625
    std_acceleration: float = 0.005
    std_observation: float = 0.05
    accel_threshold: float = 0.1
    accel_decay_rate: float = 0.1
    init_position_factor: float = 2.0
    init_velocity_factor: float = 10.0
    init_acceleration_factor: float = 10.0

    def __post_init__(self):
        stds = (self.std_position, self.std_velocity, self.std_acceleration, self.std_observation)
        if min(stds) <= 0:
            raise ValueError("noise standard deviations must be positive")
        if self.accel_threshold < 0:
            raise ValueError("accel_threshold must be >= 0")
        if self.accel_decay_rate < 0:
            raise ValueError("accel_decay_rate must be >= 0")

    def process_std(self, height: float, dim: int = STATE_DIM) -> np.ndarray:
        h = max(float(height), MIN_SIZE)
        std = [self.std_position * h] * 4 + [self.std_velocity * h] * 4
        if dim == STATE_DIM:
            std.append(self.std_acceleration * h)
        return np.asarray(std)

    def Q(self, height: float, dt: float = 1.0, dim: int = STATE_DIM) -> np.ndarray:
        return np.diag(self.process_std(height, dim) ** 2) * dt

    def R(self, height: float) -> np.ndarray:
        h = max(float(height), MIN_SIZE)
        return np.eye(OBS_DIM) * (self.std_observation * h) ** 2

    def initial_cov(self, height: float, dim: int = STATE_DIM) -> np.ndarray:
        h = max(float(height), MIN_SIZE)
        pos = self.init_position_factor * self.std_position * h
        std = [pos] * 4 + [self.init_velocity_factor * pos] * 4
        if dim == STATE_DIM:
            std.append(self.init_acceleration_factor * pos)
        return np.diag(np.asarray(std) ** 2)


@dataclass
class CubatureSet:
    points: np.ndarray  # (2n, n)
    weight: float = field(default=1.0 / (2 * STATE_DIM))

    def mean(self) -> np.ndarray:
        return self.points.mean(axis=0)


def accel_decay(a_k, dt: float = 1.0, threshold: float = 0.1, rate: float = 0.1):
    """Threshold-gated exponential decay of the acceleration state.

    Works on scalars and arrays. The threshold is applied to ``|a|`` so that
    decelerations decay the same way accelerations do.
    """
    a = np.asarray(a_k, dtype=float)
    out = np.where(np.abs(a) <= threshold, 0.0, a * math.exp(-rate * dt))
    if out.ndim == 0:
        return float(out)
    return out


def transition_points(X: np.ndarray, dt: float = 1.0, threshold: float = 0.1,
                      rate: float = 0.1) -> np.ndarray:
    """Apply the motion model to every row of ``X`` (shape ``(N, 9)``)."""
    X = np.asarray(X, dtype=float)
    out = X.copy()
    v = X[:, 4:6]
    a = X[:, 8]
    a_eff = np.where(np.abs(a) <= threshold, 0.0, a)
    speed = np.hypot(v[:, 0], v[:, 1])
    moving = speed >= MIN_SPEED
    heading = np.zeros_like(v)
    heading[moving] = v[moving] / speed[moving, None]
    accel_vec = a_eff[:, None] * heading
    out[:, 0:2] = X[:, 0:2] + v * dt + 0.5 * accel_vec * dt * dt
    out[:, 2:4] = X[:, 2:4] + X[:, 6:8] * dt
    out[:, 4:6] = v + accel_vec * dt
    out[:, 8] = accel_decay(a, dt, threshold, rate)
    return out


def transition(x, dt: float = 1.0, threshold: float = 0.1, rate: float = 0.1) -> np.ndarray:
    return transition_points(np.asarray(x, dtype=float)[None, :], dt, threshold, rate)[0]


def _cholesky(cov: np.ndarray) -> np.ndarray:
    cov = 0.5 * (cov + cov.T)
    n = cov.shape[0]
    try:
        return np.linalg.cholesky(cov + JITTER * np.eye(n))
    except np.linalg.LinAlgError as exc:
        raise CovarianceNotPSD("covariance is not positive semi-definite") from exc


def cubature_points(mean, cov) -> CubatureSet:
    mean = np.asarray(mean, dtype=float)
    n = mean.shape[0]
    S = _cholesky(np.asarray(cov, dtype=float)) * math.sqrt(n)
    points = np.vstack([mean + S.T, mean - S.T])
    return CubatureSet(points, 1.0 / (2 * n))


def _symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


def predict(s: FilterState, dt: float = 1.0, noise: NoiseConfig | None = None) -> FilterState:
    noise = noise or NoiseConfig()
    cub = cubature_points(s.x, s.P)
    Xs = transition_points(cub.points, dt, noise.accel_threshold, noise.accel_decay_rate)
    x_pred = Xs.mean(axis=0)
    dev = Xs - x_pred
    P_pred = cub.weight * dev.T @ dev + noise.Q(s.x[3], dt)
    return FilterState(x_pred, _symmetrize(P_pred))


def _gain(P_xz: np.ndarray, P_zz: np.ndarray) -> np.ndarray:
    try:
        L = np.linalg.cholesky(P_zz + JITTER * np.eye(P_zz.shape[0]))
    except np.linalg.LinAlgError as exc:
        raise SingularInnovation("innovation covariance is not invertible") from exc
    # K = P_xz P_zz^-1  via two triangular solves on the transpose
    tmp = np.linalg.solve(L, P_xz.T)
    return np.linalg.solve(L.T, tmp).T


def update(s: FilterState, z, noise: NoiseConfig | None = None) -> FilterState:
    """Correct a predicted state with an observation ``z = [x_c, y_c, w, h]``."""
    noise = noise or NoiseConfig()
    z = z.to_array() if hasattr(z, "to_array") else np.asarray(z, dtype=float)
    cub = cubature_points(s.x, s.P)
    Z = cub.points[:, :OBS_DIM]
    z_hat = Z.mean(axis=0)
    dz = Z - z_hat
    dx = cub.points - cub.points.mean(axis=0)
    P_zz = cub.weight * dz.T @ dz + noise.R(s.x[3])
    P_xz = cub.weight * dx.T @ dz
    K = _gain(P_xz, P_zz)
    x_new = s.x + K @ (z - z_hat)
    P_new = _symmetrize(s.P - K @ P_zz @ K.T)
    x_new[2:4] = np.maximum(x_new[2:4], MIN_SIZE)
    return FilterState(x_new, P_new)


def initiate(z, noise: NoiseConfig | None = None) -> FilterState:
    noise = noise or NoiseConfig()
    z = z.to_array() if hasattr(z, "to_array") else np.asarray(z, dtype=float)
    x = np.zeros(STATE_DIM)
    x[:4] = z
    return FilterState(x, noise.initial_cov(z[3]))


class VACKF:
    """Motion model object wrapping the cubature filter functions."""

    name = "vackf"

    def __init__(self, noise: NoiseConfig | None = None):
        self.noise = noise or NoiseConfig()

    def initiate(self, z) -> FilterState:
        return initiate(z, self.noise)

    def predict(self, s: FilterState, dt: float = 1.0) -> FilterState:
        return predict(s, dt, self.noise)

    def update(self, s: FilterState, z) -> FilterState:
        return update(s, z, self.noise)


class LinearKF:
    """Constant-velocity Kalman filter over ``[x_c, y_c, w, h, v_x, v_y, w_dot, h_dot]``.

    Shares the noise model with :class:`VACKF` minus the acceleration entry.
    """

    name = "kf"
    dim = 8

    def __init__(self, noise: NoiseConfig | None = None):
        self.noise = noise or NoiseConfig()
        self._H = np.hstack([np.eye(OBS_DIM), np.zeros((OBS_DIM, 4))])

    def _F(self, dt: float) -> np.ndarray:
        F = np.eye(self.dim)
        F[:4, 4:] = np.eye(4) * dt
        return F

    def initiate(self, z) -> FilterState:
        z = z.to_array() if hasattr(z, "to_array") else np.asarray(z, dtype=float)
        x = np.zeros(self.dim)
        x[:4] = z
        return FilterState(x, self.noise.initial_cov(z[3], self.dim))

    def predict(self, s: FilterState, dt: float = 1.0) -> FilterState:
        F = self._F(dt)
        P = F @ s.P @ F.T + self.noise.Q(s.x[3], dt, self.dim)
        return FilterState(F @ s.x, _symmetrize(P))

    def update(self, s: FilterState, z) -> FilterState:
        z = z.to_array() if hasattr(z, "to_array") else np.asarray(z, dtype=float)
        H = self._H
        S = H @ s.P @ H.T + self.noise.R(s.x[3])
        K = _gain(s.P @ H.T, S)
        x = s.x + K @ (z - H @ s.x)
        P = _symmetrize(s.P - K @ S @ K.T)
        x[2:4] = np.maximum(x[2:4], MIN_SIZE)
        return FilterState(x, P)
