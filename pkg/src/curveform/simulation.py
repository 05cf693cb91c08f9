"""Scenario orchestration: validate, integrate, log.

The closed loop (unicycle poses plus per-agent disturbance estimates) is
integrated as one ODE with a fixed step. A curve schedule swaps the target
coefficients at given times; poses and estimates carry over unchanged.
"""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from typing import Any, Sequence

import numpy as np

from curveform.control import CONTROLLER_FORMS, XI_FORM, FormationController, Gains
from curveform.curves import ParametricCurve, assign_parameters, stack_basis, validate_assumptions
from curveform.dynamics import EULER, METHODS, RK4, clamp_inputs, unicycle_rhs, wrap_angle
from curveform.errors import CurveformError, InvalidArgument, NotSpanningTree, NumericalAbort, ScenarioError
from curveform.topology import (
    NAMED_TOPOLOGIES,
    DirectedTopology,
    build_laplacian,
    leader_selector,
    reachable_from,
    theorem1_matrices,
)

log = logging.getLogger(__name__)

# settling threshold as a fraction of the target curve's bounding-box diagonal
SETTLE_FRACTION = 0.01


@dataclass(frozen=True)
class CurveSegment:
    start: float
    curve: ParametricCurve
    label: str = ""


@dataclass(frozen=True)
class InitialConditions:
    """How to place agents at t = 0.

    Explicit ``poses`` win. Otherwise ``on_target`` puts every virtual point on
    its target with a random heading, and the default draws positions
    uniformly from ``box`` (``xmin, xmax, ymin, ymax``) or, when absent, from
    the first curve's bounding box with each side grown by ``inflate``.
    """

    poses: np.ndarray | None = None
    box: tuple[float, float, float, float] | None = None
    inflate: float = 0.25
    on_target: bool = False
    delta_hat: np.ndarray | None = None


@dataclass(frozen=True)
class Scenario:
    n: int
    topology: DirectedTopology
    curves: tuple[CurveSegment, ...]
    gains: Gains = Gains()
    ell: float = 0.01
    disturbances: Any = (0.0, 0.0)
    dt: float = 1e-3
    duration: float = 100.0
    initial: InitialConditions = InitialConditions()
    integrator: str = EULER
    saturation: float | None = None
    seed: int = 0
    controller_form: str = XI_FORM
    include_endpoint: bool = False
    name: str = ""

    @property
    def disturbance_array(self) -> np.ndarray:
        """Per-agent ``(d1, d2)`` as an (n, 2) array; a single pair is broadcast."""
        d = np.asarray(self.disturbances, dtype=float)
        if d.shape == (2,):
            d = np.tile(d, (self.n, 1))
        return d

    @property
    def step_count(self) -> int:
        return int(math.floor(self.duration / self.dt + 1e-9))

    def switch_steps(self) -> list[int]:
        """Step index at which each curve segment becomes active."""
        return [int(math.ceil(seg.start / self.dt - 1e-9)) for seg in self.curves]


def validate_scenario(scenario: Scenario) -> list[str]:
    """Run every consistency check and return all failures (empty when valid)."""
    problems: list[str] = []
    n = scenario.n
    if isinstance(n, bool) or int(n) != n or n < 1:
        return [f"agent count must be a positive integer, got {n!r}"]

    topo = scenario.topology
    if topo.n != n:
        problems.append(f"topology has {topo.n} agents but scenario declares n={n}")
    else:
        if topo.leader_has_inputs:
            senders = [int(j) + 1 for j in topo.neighbors(0)]
            problems.append(f"leader (agent 1) must not receive information, but listens to agents {senders}")
        reach = reachable_from(topo, 0)
        if not reach.all():
            missing = [int(i) + 1 for i in np.flatnonzero(~reach)]
            problems.append(f"no rooted spanning tree at agent 1: agents {missing} unreachable")
        else:
            try:
                thm = theorem1_matrices(build_laplacian(topo), leader_selector(n))
                if not thm.positive_definite:
                    problems.append(
                        f"Lyapunov matrices not positive definite (min eig P {thm.min_eig_P:.3e}, Q {thm.min_eig_Q:.3e})"
                    )
            except NotSpanningTree as exc:
                problems.append(str(exc))

    ell = scenario.ell
    if not (np.isfinite(ell) and ell != 0):
        problems.append(f"virtual-point offset ell must be finite and nonzero, got {ell}")
    for name in ("k1", "k2"):
        value = getattr(scenario.gains, name)
        if not (np.isfinite(value) and value > 0):
            problems.append(f"gain {name} must be positive, got {value}")
    if not (np.isfinite(scenario.dt) and scenario.dt > 0):
        problems.append(f"time step dt must be positive, got {scenario.dt}")
    if not (np.isfinite(scenario.duration) and scenario.duration > 0):
        problems.append(f"duration must be positive, got {scenario.duration}")
    elif scenario.dt > 0 and scenario.dt > scenario.duration:
        problems.append(f"time step {scenario.dt} exceeds duration {scenario.duration}")
    if scenario.integrator not in METHODS:
        problems.append(f"unknown integrator {scenario.integrator!r}; expected one of {METHODS}")
    if scenario.controller_form not in CONTROLLER_FORMS:
        problems.append(f"unknown controller form {scenario.controller_form!r}; expected one of {CONTROLLER_FORMS}")
    if scenario.saturation is not None and not scenario.saturation > 0:
        problems.append(f"saturation limit must be positive, got {scenario.saturation}")

    d = scenario.disturbance_array
    if d.shape != (n, 2):
        problems.append(f"disturbances must be one (d1, d2) pair or one per agent; got shape {d.shape}")
    elif not np.all(np.isfinite(d)):
        problems.append("disturbances must be finite")

    init = scenario.initial
    if init.poses is not None:
        poses = np.asarray(init.poses, dtype=float)
        if poses.shape != (n, 3):
            problems.append(f"initial poses must have shape ({n}, 3), got {poses.shape}")
        elif not np.all(np.isfinite(poses)):
            problems.append("initial poses must be finite")
    if init.delta_hat is not None and np.asarray(init.delta_hat, dtype=float).shape not in ((2,), (n, 2)):
        problems.append(f"initial disturbance estimate must be a pair or ({n}, 2)")
    if init.box is not None:
        box = init.box
        if len(box) != 4 or not (box[0] <= box[1] and box[2] <= box[3]):
            problems.append(f"initial box must be (xmin, xmax, ymin, ymax) with min <= max, got {box}")

    if not scenario.curves:
        problems.append("curve schedule is empty")
    else:
        starts = [seg.start for seg in scenario.curves]
        if starts[0] != 0:
            problems.append(f"first curve must start at t=0, got {starts[0]}")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            problems.append(f"curve start times must be strictly increasing, got {starts}")
        if np.isfinite(scenario.duration) and any(s >= scenario.duration for s in starts[1:]):
            problems.append("a curve segment starts at or after the end of the run")
        s_values = assign_parameters(n, scenario.include_endpoint)
        for k, seg in enumerate(scenario.curves):
            label = seg.label or f"curve #{k + 1}"
            report = validate_assumptions(stack_basis(seg.curve.family, s_values), n, seg.curve.H)
            problems.extend(f"{label}: {msg}" for msg in report.problems())
    return problems


def check_scenario(scenario: Scenario) -> Scenario:
    problems = validate_scenario(scenario)
    if problems:
        raise ScenarioError(problems)
    return scenario


def initial_poses(scenario: Scenario) -> np.ndarray:
    n = scenario.n
    init = scenario.initial
    if init.poses is not None:
        return np.array(init.poses, dtype=float)
    rng = np.random.default_rng(scenario.seed)
    if init.on_target:
        first = scenario.curves[0].curve
        targets = first(assign_parameters(n, scenario.include_endpoint))
        theta = rng.uniform(0.0, 2.0 * np.pi, n)
        xy = targets - scenario.ell * np.column_stack([np.cos(theta), np.sin(theta)])
        return np.column_stack([xy, theta])
    if init.box is not None:
        xmin, xmax, ymin, ymax = init.box
    else:
        lo, hi = scenario.curves[0].curve.bounding_box()
        pad = 0.5 * init.inflate * (hi - lo)
        (xmin, ymin), (xmax, ymax) = lo - pad, hi + pad
    x = rng.uniform(xmin, xmax, n)
    y = rng.uniform(ymin, ymax, n)
    theta = rng.uniform(0.0, 2.0 * np.pi, n)
    return np.column_stack([x, y, theta])


def initial_estimates(scenario: Scenario) -> np.ndarray:
    dh = scenario.initial.delta_hat
    if dh is None:
        return np.zeros((scenario.n, 2))
    dh = np.asarray(dh, dtype=float)
    return np.tile(dh, (scenario.n, 1)) if dh.shape == (2,) else dh.copy()


@dataclass
class TrajectoryLog:
    """Per-step record of a run. Arrays are indexed ``[step, agent, ...]``.

    ``poses`` keep theta unwrapped; use :attr:`theta_wrapped` for reporting.
    ``inputs`` hold the commanded ``(v, omega)`` applied over the step that
    starts at the same index.
    """

    scenario: Scenario
    times: np.ndarray
    poses: np.ndarray
    virtual_points: np.ndarray
    inputs: np.ndarray
    estimates: np.ndarray
    error_norm: np.ndarray
    lyapunov: np.ndarray
    segment: np.ndarray
    completed: bool = True
    targets: list[np.ndarray] = field(default_factory=list)

    def __len__(self):
        return self.times.shape[0]

    @property
    def theta_wrapped(self) -> np.ndarray:
        return wrap_angle(self.poses[..., 2])

    @property
    def heading_rates(self) -> np.ndarray:
        """``omega_i + d_i2`` per step and agent."""
        return self.inputs[..., 1] + self.scenario.disturbance_array[:, 1]

    def position_errors(self, step: int = -1) -> np.ndarray:
        return self.virtual_points[step] - self.targets[int(self.segment[step])]

    def switch_steps(self) -> list[int]:
        return [int(k) for k in np.flatnonzero(np.diff(self.segment)) + 1]

    def disturbance_errors(self, step: int = -1) -> np.ndarray:
        """Per-agent ``|k2 delta_hat_i - d_i|``."""
        k2 = self.scenario.gains.k2
        return np.linalg.norm(k2 * self.estimates[step] - self.scenario.disturbance_array, axis=1)

    def settle_threshold(self, segment: int = -1) -> float:
        lo, hi = self.scenario.curves[segment].curve.bounding_box()
        return SETTLE_FRACTION * float(np.linalg.norm(hi - lo))

    def settling_times(self) -> list[float | None]:
        """Time from each segment start until the error norm stays below threshold."""
        out = []
        for k in range(len(self.scenario.curves)):
            idx = np.flatnonzero(self.segment == k)
            if idx.size == 0:
                out.append(None)
                continue
            below = self.error_norm[idx] < self.settle_threshold(k)
            if not below[-1]:
                out.append(None)
                continue
            above = np.flatnonzero(~below)
            first = idx[0] if above.size == 0 else idx[above[-1] + 1]
            out.append(float(self.times[first] - self.times[idx[0]]))
        return out

    def summary(self) -> dict:
        sc = self.scenario
        return {
            "name": sc.name,
            "completed": self.completed,
            "steps": int(len(self) - 1),
            "dt": sc.dt,
            "duration": sc.duration,
            "seed": sc.seed,
            "initial_error_norm": float(self.error_norm[0]),
            "terminal_error_norm": float(self.error_norm[-1]),
            "terminal_lyapunov": float(self.lyapunov[-1]),
            "settle_threshold": self.settle_threshold(),
            "settling_times": self.settling_times(),
            "terminal_agent_distances": np.linalg.norm(self.position_errors(), axis=1).tolist(),
            "terminal_disturbance_error": float(self.disturbance_errors().max()),
            "terminal_heading_rate": float(np.abs(self.heading_rates[-1]).max()),
            "terminal_theta_wrapped": self.theta_wrapped[-1].tolist(),
        }


def _allocate(scenario: Scenario, steps: int):
    n = scenario.n
    K = steps + 1
    return dict(
        times=np.arange(K) * scenario.dt,
        poses=np.empty((K, n, 3)),
        virtual_points=np.empty((K, n, 2)),
        inputs=np.empty((K, n, 2)),
        estimates=np.empty((K, n, 2)),
        error_norm=np.empty(K),
        lyapunov=np.empty(K),
        segment=np.empty(K, dtype=np.int64),
    )


def _truncate(arrays: dict, count: int) -> dict:
    return {k: v[:count] for k, v in arrays.items()}


def run_scenario(scenario: Scenario, validate: bool = True) -> TrajectoryLog:
    """Integrate the closed loop from t = 0 to ``duration`` and log every step.

    Raises :class:`ScenarioError` on invalid input and :class:`NumericalAbort`
    (carrying the partial log) if any state becomes non-finite.
    """
    if validate:
        check_scenario(scenario)
    # overflow is caught explicitly below and reported as NumericalAbort
    with np.errstate(over="ignore", invalid="ignore"):
        return _integrate(scenario)


def _integrate(scenario: Scenario) -> TrajectoryLog:
    n = scenario.n
    dt = scenario.dt
    steps = scenario.step_count
    d = scenario.disturbance_array
    d_scaled = d / scenario.gains.k2
    sat = scenario.saturation

    controllers = [
        FormationController(seg.curve, scenario.topology, scenario.gains, scenario.ell,
                            scenario.controller_form, scenario.include_endpoint)
        for seg in scenario.curves
    ]
    P = theorem1_matrices(build_laplacian(scenario.topology), leader_selector(n)).P
    p2 = np.repeat(np.diag(P), 2)
    switch = scenario.switch_steps()

    pose = initial_poses(scenario)
    dh = initial_estimates(scenario)
    arrays = _allocate(scenario, steps)
    seg = 0
    ctrl = controllers[0]

    def closed_loop(pose_, dh_):
        u_, _, x_e_, rate_ = ctrl.evaluate(pose_, dh_)
        if sat is not None:
            u_ = clamp_inputs(u_, sat)
        return u_, x_e_, rate_

    log.info("running %s: n=%d, %d steps of %g s (%s)", scenario.name or "scenario", n, steps, dt,
             scenario.integrator)
    for k in range(steps + 1):
        while seg + 1 < len(switch) and k >= switch[seg + 1]:
            seg += 1
            ctrl = controllers[seg]
            log.info("step %d: switching to curve segment %d", k, seg + 1)
        u, x_e, rate = closed_loop(pose, dh)
        # nan and inf both survive summation
        if not math.isfinite(u.sum() + pose.sum() + dh.sum()):
            partial = TrajectoryLog(scenario, **_truncate(arrays, k), completed=False,
                                    targets=[c.targets for c in controllers])
            raise NumericalAbort(k, partial)
        arrays["poses"][k] = pose
        arrays["virtual_points"][k] = x_e + ctrl.targets
        arrays["inputs"][k] = u
        arrays["estimates"][k] = dh
        xe2 = (x_e * x_e).ravel()
        dtl = (dh - d_scaled).ravel()
        arrays["error_norm"][k] = math.sqrt(xe2.sum())
        arrays["lyapunov"][k] = p2 @ xe2 + p2 @ (dtl * dtl)
        arrays["segment"][k] = seg
        if k == steps:
            break
        if scenario.integrator == RK4:
            pose, dh = _rk4_step(closed_loop, pose, dh, d, dt, u, rate)
        else:
            applied = u + d
            th = pose[:, 2]
            pose = pose.copy()
            pose[:, 0] += dt * np.cos(th) * applied[:, 0]
            pose[:, 1] += dt * np.sin(th) * applied[:, 0]
            pose[:, 2] += dt * applied[:, 1]
            dh = dh + dt * rate
    return TrajectoryLog(scenario, **arrays, completed=True, targets=[c.targets for c in controllers])


def _rk4_step(closed_loop, pose, dh, d, dt, u1, r1):
    f1 = unicycle_rhs(pose, u1 + d)
    u2, _, r2 = closed_loop(pose + 0.5 * dt * f1, dh + 0.5 * dt * r1)
    f2 = unicycle_rhs(pose + 0.5 * dt * f1, u2 + d)
    u3, _, r3 = closed_loop(pose + 0.5 * dt * f2, dh + 0.5 * dt * r2)
    f3 = unicycle_rhs(pose + 0.5 * dt * f2, u3 + d)
    u4, _, r4 = closed_loop(pose + dt * f3, dh + dt * r3)
    f4 = unicycle_rhs(pose + dt * f3, u4 + d)
    pose = pose + dt / 6.0 * (f1 + 2 * f2 + 2 * f3 + f4)
    dh = dh + dt / 6.0 * (r1 + 2 * r2 + 2 * r3 + r4)
    return pose, dh


@dataclass(frozen=True)
class DistributionReport:
    distances: np.ndarray
    tolerance: float
    completed: bool

    @property
    def max_distance(self) -> float:
        return float(self.distances.max())

    @property
    def passed(self) -> bool | None:
        """``None`` for truncated runs: distances are diagnostic only."""
        if not self.completed:
            return None
        return self.max_distance < self.tolerance


def uniform_distribution_check(log_: TrajectoryLog, curve: ParametricCurve | None = None,
                               tolerance: float = 1e-2) -> DistributionReport:
    """Distance of each agent's final virtual point from its assigned curve point."""
    if len(log_) == 0:
        return DistributionReport(np.full(log_.scenario.n, np.inf), tolerance, False)
    if curve is None:
        err = log_.position_errors()
    else:
        s = assign_parameters(log_.scenario.n, log_.scenario.include_endpoint)
        err = log_.virtual_points[-1] - curve(s)
    return DistributionReport(np.linalg.norm(err, axis=1), tolerance, log_.completed)


def apply_overrides(scenario: Scenario, overrides: dict) -> Scenario:
    """Copy of ``scenario`` with fields replaced.

    Keys are :class:`Scenario` field names plus ``k1``/``k2`` for the gains;
    a string ``topology`` is looked up among the named default topologies.
    """
    names = {f.name for f in fields(Scenario)}
    changes: dict[str, Any] = {}
    gains = {}
    for key, value in overrides.items():
        if key in ("k1", "k2"):
            gains[key] = float(value)
        elif key == "topology" and isinstance(value, str):
            try:
                changes[key] = NAMED_TOPOLOGIES[value](scenario.n)
            except KeyError:
                raise InvalidArgument(f"unknown topology {value!r}; known: {sorted(NAMED_TOPOLOGIES)}") from None
        elif key in names:
            changes[key] = value
        else:
            raise InvalidArgument(f"cannot sweep over unknown field {key!r}")
    if gains:
        changes["gains"] = replace(scenario.gains, **gains)
    return replace(scenario, **changes)


@dataclass(frozen=True)
class SweepResult:
    params: dict
    summary: dict | None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _run_point(scenario: Scenario, params: dict) -> SweepResult:
    try:
        result = run_scenario(apply_overrides(scenario, params))
        return SweepResult(params, result.summary())
    except CurveformError as exc:
        return SweepResult(params, None, f"{type(exc).__name__}: {exc}")


def sweep(template: Scenario, grid: dict[str, Sequence], workers: int = 1) -> list[SweepResult]:
    """Run the Cartesian product of ``grid`` over ``template``.

    Results come back in grid order regardless of ``workers``; a failing point
    is recorded and the sweep continues.
    """
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise InvalidArgument("sweep grid must have at least one value per parameter")
    keys = list(grid)
    points = [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]
    if workers <= 1:
        return [_run_point(template, pt) for pt in points]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_point, [template] * len(points), points))
