"""Unicycle kinematics with constant input disturbance.

Poses are arrays whose last axis is ``(x, y, theta)``; inputs and
disturbances have last axis ``(v, omega)``. Every function broadcasts over
leading axes so a whole team can be handled as an ``(n, 3)`` array.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from curveform.errors import InvalidArgument

EULER = "euler"
RK4 = "rk4"
METHODS = (EULER, RK4)


@dataclass(frozen=True)
class AgentState:
    x: float
    y: float
    theta: float

    def __post_init__(self):
        if not all(np.isfinite([self.x, self.y, self.theta])):
            raise InvalidArgument("agent state must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta], dtype=float)

    @property
    def wrapped_theta(self) -> float:
        return float(wrap_angle(self.theta))


def check_offset(ell: float) -> float:
    ell = float(ell)
    if ell == 0.0 or not np.isfinite(ell):
        raise InvalidArgument(f"virtual-point offset must be finite and nonzero, got {ell}")
    return ell


def wrap_angle(theta):
    """Map angles to ``[0, 2 pi)``; used for reporting only."""
    w = np.mod(theta, 2.0 * np.pi)
    # mod can round up to exactly 2 pi for tiny negative inputs
    return np.where(w >= 2.0 * np.pi, 0.0, w)


def virtual_point(state, ell: float) -> np.ndarray:
    """Point offset by ``ell`` along the heading: ``(x + ell cos th, y + ell sin th)``."""
    state = np.asarray(state, dtype=float)
    th = state[..., 2]
    return np.stack([state[..., 0] + ell * np.cos(th), state[..., 1] + ell * np.sin(th)], axis=-1)


def input_matrix(theta, ell: float) -> np.ndarray:
    """``R(theta) = [[cos, -ell sin], [sin, ell cos]]`` mapping ``(v, omega)`` to virtual-point velocity."""
    ell = check_offset(ell)
    c, s = np.cos(theta), np.sin(theta)
    return np.stack([np.stack([c, -ell * s], axis=-1), np.stack([s, ell * c], axis=-1)], axis=-2)


def apply_input_matrix(theta, ell: float, w) -> np.ndarray:
    """``R(theta) @ w`` without materialising ``R``."""
    c, s = np.cos(theta), np.sin(theta)
    w = np.asarray(w, dtype=float)
    return np.stack([c * w[..., 0] - ell * s * w[..., 1], s * w[..., 0] + ell * c * w[..., 1]], axis=-1)


def apply_input_matrix_transpose(theta, ell: float, w) -> np.ndarray:
    """``R(theta)^T @ w``."""
    c, s = np.cos(theta), np.sin(theta)
    w = np.asarray(w, dtype=float)
    return np.stack([c * w[..., 0] + s * w[..., 1], ell * (c * w[..., 1] - s * w[..., 0])], axis=-1)


def inverse_input_map(theta, ell: float, u_bar) -> np.ndarray:
    """Recover ``(v, omega) = R(theta)^-1 u_bar``."""
    ell = check_offset(ell)
    c, s = np.cos(theta), np.sin(theta)
    u_bar = np.asarray(u_bar, dtype=float)
    return np.stack([c * u_bar[..., 0] + s * u_bar[..., 1], (c * u_bar[..., 1] - s * u_bar[..., 0]) / ell], axis=-1)


def block_input_matrix(thetas, ell: float) -> np.ndarray:
    """Block-diagonal ``diag(R_1, ..., R_n)`` of size 2n x 2n."""
    blocks = input_matrix(np.asarray(thetas, dtype=float), ell)
    n = blocks.shape[0]
    R = np.zeros((2 * n, 2 * n))
    for i in range(n):
        R[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = blocks[i]
    return R


def clamp_inputs(u, v_max: float | None = None, omega_max: float | None = None) -> np.ndarray:
    """Symmetric saturation of commanded speeds; ``None`` leaves a channel free."""
    u = np.array(u, dtype=float)
    if v_max is not None:
        u[..., 0] = np.clip(u[..., 0], -v_max, v_max)
    if omega_max is not None:
        u[..., 1] = np.clip(u[..., 1], -omega_max, omega_max)
    return u


def unicycle_rhs(state, applied) -> np.ndarray:
    """Pose derivative for total applied input ``applied = u + d``."""
    state = np.asarray(state, dtype=float)
    applied = np.asarray(applied, dtype=float)
    th = state[..., 2]
    return np.stack([np.cos(th) * applied[..., 0], np.sin(th) * applied[..., 0], applied[..., 1]], axis=-1)


def step_state(state, u, d, dt: float, method: str = EULER) -> np.ndarray:
    """Advance poses one step with ``u`` and ``d`` held constant over the step."""
    if not dt > 0:
        raise InvalidArgument(f"time step must be positive, got {dt}")
    state = np.asarray(state, dtype=float)
    applied = np.asarray(u, dtype=float) + np.asarray(d, dtype=float)
    if method == EULER:
        return state + dt * unicycle_rhs(state, applied)
    if method == RK4:
        k1 = unicycle_rhs(state, applied)
        k2 = unicycle_rhs(state + 0.5 * dt * k1, applied)
        k3 = unicycle_rhs(state + 0.5 * dt * k2, applied)
        k4 = unicycle_rhs(state + dt * k3, applied)
        return state + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    raise InvalidArgument(f"unknown integrator {method!r}; expected one of {METHODS}")
