"""Leader-follower formation law, disturbance observer and Lyapunov monitor.

Stacked vectors are 2n long with agent ``i`` occupying entries ``2i, 2i+1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from curveform.curves import ParametricCurve, assign_parameters, pseudoinverse, stack_basis
from curveform.dynamics import check_offset, virtual_point
from curveform.errors import ConfigurationError, InvalidArgument
from curveform.topology import LEADER, DirectedTopology, build_laplacian, extend_matrix, leader_selector

XI_FORM = "xi"
DIFFERENCE_FORM = "difference"
CONTROLLER_FORMS = (XI_FORM, DIFFERENCE_FORM)


@dataclass(frozen=True)
class Gains:
    k1: float = 1.0
    k2: float = 1.0

    def __post_init__(self):
        for name in ("k1", "k2"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise InvalidArgument(f"gain {name} must be positive, got {value}")


@dataclass(frozen=True)
class FormationErrors:
    position: np.ndarray
    coefficient: np.ndarray


def compute_errors(x_bar, G, G_pinv, xi) -> FormationErrors:
    """Position error ``x_bar - G xi`` and coefficient error ``G+ x_bar - xi``."""
    x_bar = np.asarray(x_bar, dtype=float).ravel()
    G = np.asarray(G, dtype=float)
    G_pinv = np.asarray(G_pinv, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if G.shape[0] != x_bar.size or G.shape[1] != xi.size or G_pinv.shape != G.T.shape:
        raise InvalidArgument(
            f"inconsistent shapes: x_bar {x_bar.shape}, G {G.shape}, G+ {G_pinv.shape}, xi {xi.shape}"
        )
    return FormationErrors(position=x_bar - G @ xi, coefficient=G_pinv @ x_bar - xi)


def _weights(topology) -> np.ndarray:
    return topology.weights if isinstance(topology, DirectedTopology) else np.asarray(topology, dtype=float)


def _check_neighbors(i, A):
    if i != LEADER and not np.any(A[i] > 0):
        raise ConfigurationError(f"follower {i + 1} has no in-neighbours; no spanning tree from the leader")


def agent_control(i, topology, G, xi, x_bar, xi_e, delta_hat_i, R_i, gains: Gains) -> np.ndarray:
    """Linearised control of agent ``i`` (0 is the leader) in coefficient-error form.

    The leader regulates its own absolute error. A follower uses
    ``-k1 sum_j a_ij (G_i - G_j) xi_e`` and no absolute information.
    Both subtract the disturbance compensation ``k2 R_i delta_hat_i``.
    """
    A = _weights(topology)
    _check_neighbors(i, A)
    G = np.asarray(G, dtype=float)
    Gi = G[2 * i : 2 * i + 2]
    compensation = gains.k2 * np.asarray(R_i) @ np.asarray(delta_hat_i, dtype=float)
    if i == LEADER:
        x_bar = np.asarray(x_bar, dtype=float).ravel()
        return -gains.k1 * (x_bar[2 * i : 2 * i + 2] - Gi @ xi) - compensation
    term = np.zeros(2)
    for j in np.flatnonzero(A[i] > 0):
        term += A[i, j] * (Gi - G[2 * j : 2 * j + 2]) @ xi_e
    return -gains.k1 * term - compensation


def difference_control(i, topology, x_e, delta_hat_i, R_i, gains: Gains) -> np.ndarray:
    """Agent control using neighbour position-error differences.

    Equal to :func:`agent_control` whenever ``G xi_e == x_e``, i.e. under
    full rank and ``n <= H``; it needs only neighbour information.
    """
    A = _weights(topology)
    _check_neighbors(i, A)
    x_e = np.asarray(x_e, dtype=float).reshape(-1, 2)
    compensation = gains.k2 * np.asarray(R_i) @ np.asarray(delta_hat_i, dtype=float)
    if i == LEADER:
        return -gains.k1 * x_e[i] - compensation
    term = (A[i][:, None] * (x_e[i] - x_e)).sum(axis=0)
    return -gains.k1 * term - compensation


def stacked_control(x_e, xi_e, delta_hat, L_bar, Lambda_bar, R, G, gains: Gains) -> np.ndarray:
    """``-k1 (L_bar G xi_e + Lambda_bar x_e) - k2 R delta_hat``."""
    x_e = np.asarray(x_e, dtype=float).ravel()
    delta_hat = np.asarray(delta_hat, dtype=float).ravel()
    m = x_e.size
    for name, mat in (("L_bar", L_bar), ("Lambda_bar", Lambda_bar), ("R", R)):
        if np.shape(mat) != (m, m):
            raise InvalidArgument(f"{name} must be {m}x{m}, got {np.shape(mat)}")
    if np.shape(G)[0] != m or delta_hat.size != m:
        raise InvalidArgument("G / delta_hat do not match the stacked error length")
    return -gains.k1 * (L_bar @ (G @ xi_e) + Lambda_bar @ x_e) - gains.k2 * (R @ delta_hat)


def observer_rate(R_i, x_bar_i, target_i, k2: float) -> np.ndarray:
    return k2 * np.asarray(R_i).T @ (np.asarray(x_bar_i, dtype=float) - np.asarray(target_i, dtype=float))


def observer_update(delta_hat_i, R_i, x_bar_i, target_i, k2: float, dt: float) -> np.ndarray:
    """One explicit Euler step of the disturbance estimate."""
    if not dt > 0:
        raise InvalidArgument(f"time step must be positive, got {dt}")
    return np.asarray(delta_hat_i, dtype=float) + dt * observer_rate(R_i, x_bar_i, target_i, k2)


def disturbance_error(delta_hat, d, k2: float) -> np.ndarray:
    """``delta_hat - d / k2``; zero once the observer has converged."""
    return np.asarray(delta_hat, dtype=float) - np.asarray(d, dtype=float) / k2


def lyapunov_value(x_e, delta_tilde, P) -> float:
    """``x_e^T (P kron I2) x_e + dt^T (P kron I2) dt`` evaluated without the Kronecker product."""
    p = np.diag(np.asarray(P, dtype=float))
    x_e = np.asarray(x_e, dtype=float).reshape(-1, 2)
    delta_tilde = np.asarray(delta_tilde, dtype=float).reshape(-1, 2)
    return float(p @ (x_e**2).sum(axis=1) + p @ (delta_tilde**2).sum(axis=1))


def lyapunov_rate(x_e, Q, k1: float) -> float:
    """Closed-loop ``dV/dt = -k1 x_e^T (Q kron I2) x_e``."""
    x_e = np.asarray(x_e, dtype=float).reshape(-1, 2)
    Q = np.asarray(Q, dtype=float)
    return float(-k1 * np.einsum("ik,ij,jk->", x_e, Q, x_e))


def closed_loop_rate(x_e, xi_e, delta_tilde, L_bar, Lambda_bar, R, G, gains: Gains) -> np.ndarray:
    """Virtual-point velocity ``-k1 (L_bar G xi_e + Lambda_bar x_e) - k2 R delta_tilde``."""
    return stacked_control(x_e, xi_e, delta_tilde, L_bar, Lambda_bar, R, G, gains)


class FormationController:
    """Precomputed control law for one curve, topology and gain set.

    Operates on whole-team arrays: poses ``(n, 3)`` and estimates ``(n, 2)``.
    """

    def __init__(self, curve: ParametricCurve, topology: DirectedTopology, gains: Gains, ell: float,
                 form: str = XI_FORM, include_endpoint: bool = False):
        if form not in CONTROLLER_FORMS:
            raise InvalidArgument(f"unknown controller form {form!r}; expected one of {CONTROLLER_FORMS}")
        A = topology.weights
        for i in range(1, topology.n):
            _check_neighbors(i, A)
        self.curve = curve
        self.topology = topology
        self.gains = gains
        self.ell = check_offset(ell)
        self.form = form
        n = topology.n
        self.s_values = assign_parameters(n, include_endpoint)
        self.stack = stack_basis(curve.family, self.s_values)
        self.G = self.stack.matrix
        self.G_pinv = pseudoinverse(self.G)
        self.targets = (self.G @ curve.xi).reshape(n, 2)
        self.L = build_laplacian(topology)
        self.Lambda = leader_selector(n)
        L_bar, Lambda_bar = extend_matrix(self.L), extend_matrix(self.Lambda)
        # formation term is affine in the stacked virtual points: M x_bar - b
        if form == XI_FORM:
            # G xi_e = G G+ x_bar - G xi
            self._term_matrix = L_bar @ self.G @ self.G_pinv + Lambda_bar
        else:
            self._term_matrix = L_bar + Lambda_bar
        self._term_offset = (L_bar + Lambda_bar) @ self.targets.ravel()

    @property
    def n(self) -> int:
        return self.topology.n

    def position_errors(self, poses) -> np.ndarray:
        return virtual_point(poses, self.ell) - self.targets

    def formation_term(self, x_bar) -> np.ndarray:
        """``L_bar G xi_e + Lambda_bar x_e`` (or ``L_bar x_e + ...`` in difference form) as (n, 2)."""
        return (self._term_matrix @ x_bar.ravel() - self._term_offset).reshape(-1, 2)

    def evaluate(self, poses, delta_hat):
        """Return ``(u, u_bar, x_e, observer_rate)`` for the current team state."""
        # hot path: trig evaluated once, R applied elementwise
        ell, k1, k2 = self.ell, self.gains.k1, self.gains.k2
        theta = poses[:, 2]
        c, s = np.cos(theta), np.sin(theta)
        x_bar = poses[:, :2].copy()
        x_bar[:, 0] += ell * c
        x_bar[:, 1] += ell * s
        x_e = x_bar - self.targets
        u_bar = -k1 * self.formation_term(x_bar)
        u_bar[:, 0] -= k2 * (c * delta_hat[:, 0] - ell * s * delta_hat[:, 1])
        u_bar[:, 1] -= k2 * (s * delta_hat[:, 0] + ell * c * delta_hat[:, 1])
        u = np.empty_like(u_bar)
        u[:, 0] = c * u_bar[:, 0] + s * u_bar[:, 1]
        u[:, 1] = (c * u_bar[:, 1] - s * u_bar[:, 0]) / ell
        rate = np.empty_like(x_e)
        rate[:, 0] = k2 * (c * x_e[:, 0] + s * x_e[:, 1])
        rate[:, 1] = k2 * ell * (c * x_e[:, 1] - s * x_e[:, 0])
        return u, u_bar, x_e, rate
