"""Desk-scale constrained rendezvous testbed.

Deputy-relative-to-chief motion follows the Hill-Clohessy-Wiltshire equations
about a circular chief orbit, discretized exactly once per scenario via the
matrix exponential.  The nominal plan is a straight V-bar approach at constant
closing speed, tracked by an infinite-horizon discrete LQR whose command is
saturated per axis.  Constraints: stay outside the keep-out sphere (while
inside the approach gate), stay inside the line-of-sight approach cone, and
keep the unsaturated command within the per-axis actuation bound.  A margin
is positive iff every constraint holds strictly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import expm, solve_discrete_are

from .jsonio import load_json, write_csv

__all__ = [
    "ScenarioError",
    "RelativeState",
    "Scenario",
    "RolloutResult",
    "hcw_system",
    "discretize_hcw",
    "dlqr_gain",
    "step_dynamics",
    "reference_state",
    "lqr_command",
    "nominal_control",
    "constraint_margin",
    "rollout",
    "rollout_min_margins",
    "scenario_from_dict",
    "scenario_to_dict",
    "load_scenario",
    "trajectory_csv_rows",
    "TRAJECTORY_COLUMNS",
]

TRAJECTORY_COLUMNS = ["t", "r_x", "r_y", "r_z", "v_x", "v_y", "v_z", "u_x", "u_y", "u_z", "margin"]


class ScenarioError(ValueError):
    """Invalid scenario configuration; message names the offending field."""


@dataclass
class RelativeState:
    """Deputy state relative to the chief in the rotating Hill frame."""

    r: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def __post_init__(self) -> None:
        self.r = np.asarray(self.r, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if self.r.shape != (3,) or self.v.shape != (3,):
            raise ValueError("r and v must be 3-vectors")
        if not (np.all(np.isfinite(self.r)) and np.all(np.isfinite(self.v)) and np.isfinite(self.t)):
            raise ValueError("state must be finite")

    def vector(self) -> np.ndarray:
        return np.concatenate([self.r, self.v])

    @classmethod
    def from_vector(cls, x: np.ndarray, t: float = 0.0) -> "RelativeState":
        x = np.asarray(x, dtype=float)
        return cls(x[:3].copy(), x[3:].copy(), t)


def hcw_system(n: float) -> tuple[np.ndarray, np.ndarray]:
    """Continuous-time HCW pair (A, B) for mean motion n."""
    a = np.zeros((6, 6))
    a[:3, 3:] = np.eye(3)
    a[3, 0] = 3.0 * n * n
    a[3, 4] = 2.0 * n
    a[4, 3] = -2.0 * n
    a[5, 2] = -n * n
    b = np.zeros((6, 3))
    b[3:, :] = np.eye(3)
    return a, b


def discretize_hcw(n: float, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact zero-order-hold discretization via the augmented exponential."""
    a, b = hcw_system(n)
    m = np.zeros((9, 9))
    m[:6, :6] = a
    m[:6, 6:] = b
    phi = expm(m * dt)
    return phi[:6, :6], phi[:6, 6:]


def dlqr_gain(ad: np.ndarray, bd: np.ndarray, q: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Infinite-horizon discrete LQR gain K with u = -K x."""
    p = solve_discrete_are(ad, bd, q, r)
    return np.linalg.solve(r + bd.T @ p @ bd, bd.T @ p @ ad)


@dataclass
class Scenario:
    """Everything one constrained-approach mission needs, plus cached matrices."""

    mean_motion: float = 0.00113
    dt: float = 10.0
    horizon_steps: int = 120
    keep_out_radius: float = 200.0
    cone_half_angle: float = math.radians(20.0)
    u_max: float = 0.05
    q_pos: float = 2e-6
    q_vel: float = 1e-6
    r_ctrl: float = 1.0
    ref_start_range: float = 1200.0
    closing_speed: float = 0.5
    hold_range: float = 240.0
    capture_radius: float = 1300.0
    approach_gate_radius: float = 2400.0
    max_mission_time: float = 900.0
    governor_period_steps: int = 1
    shift_min: float | None = None
    initial_state: RelativeState = None

    def __post_init__(self) -> None:
        checks = [
            ("mean_motion", self.mean_motion > 0),
            ("dt", self.dt > 0),
            ("horizon_steps", self.horizon_steps >= 1),
            ("keep_out_radius", self.keep_out_radius > 0),
            ("cone_half_angle", 0 < self.cone_half_angle < math.pi / 2),
            ("u_max", self.u_max > 0),
            ("q_pos", self.q_pos > 0),
            ("q_vel", self.q_vel > 0),
            ("r_ctrl", self.r_ctrl > 0),
            ("ref_start_range", self.ref_start_range > 0),
            ("closing_speed", self.closing_speed > 0),
            ("hold_range", 0 < self.hold_range),
            ("capture_radius", self.capture_radius > 0),
            ("approach_gate_radius", self.approach_gate_radius > 0),
            ("max_mission_time", self.max_mission_time > 0),
            ("governor_period_steps", self.governor_period_steps >= 1),
        ]
        for name, ok in checks:
            if not ok:
                raise ScenarioError(f"{name}: invalid value {getattr(self, name)!r}")
        if self.shift_min is None:
            self.shift_min = -self.dt * self.horizon_steps
        if self.shift_min > 0:
            raise ScenarioError(f"shift_min: must be <= 0, got {self.shift_min}")
        if self.initial_state is None:
            self.initial_state = RelativeState(
                np.array([0.0, 1800.0, 0.0]), np.array([0.0, -self.closing_speed, 0.0])
            )
        self.ad, self.bd = discretize_hcw(self.mean_motion, self.dt)
        q = np.diag([self.q_pos] * 3 + [self.q_vel] * 3)
        r = self.r_ctrl * np.eye(3)
        self.gain = dlqr_gain(self.ad, self.bd, q, r)

    @property
    def horizon_duration(self) -> float:
        return self.dt * self.horizon_steps

    def with_initial_state(self, state: RelativeState) -> "Scenario":
        return replace(self, initial_state=state)


# the approach corridor runs along +y (V-bar, ahead of the chief in-track)
APPROACH_AXIS = np.array([0.0, 1.0, 0.0])


def reference_range(tau, scenario: Scenario):
    """Range-to-chief of the nominal plan at plan time tau (clamped at hold)."""
    rho = scenario.ref_start_range - scenario.closing_speed * np.asarray(tau, dtype=float)
    return np.maximum(rho, scenario.hold_range)


def reference_vectors(t_query, t_shift, scenario: Scenario):
    """Reference (position, velocity) at shifted plan time; broadcasts over inputs."""
    tau = np.asarray(t_query, dtype=float) + np.asarray(t_shift, dtype=float)
    rho_raw = scenario.ref_start_range - scenario.closing_speed * tau
    rho = np.maximum(rho_raw, scenario.hold_range)
    closing = np.where(rho_raw > scenario.hold_range, -scenario.closing_speed, 0.0)
    pos = rho[..., None] * APPROACH_AXIS
    vel = closing[..., None] * APPROACH_AXIS
    return pos, vel


def reference_state(t_query: float, t_shift: float, scenario: Scenario) -> RelativeState:
    """Nominal approach target evaluated at time t_query + t_shift."""
    pos, vel = reference_vectors(t_query, t_shift, scenario)
    return RelativeState(pos, vel, t_query)


def step_dynamics(state: RelativeState, u: np.ndarray, scenario: Scenario) -> RelativeState:
    """Exact HCW step over dt with zero-order-hold control."""
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise ValueError("non-finite control")
    x = scenario.ad @ state.vector() + scenario.bd @ u
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite state after propagation")
    return RelativeState.from_vector(x, state.t + scenario.dt)


def lqr_command(x: np.ndarray, t: float, t_shift: float, scenario: Scenario) -> np.ndarray:
    """Unsaturated tracking command -K (x - x_ref(t + t_shift))."""
    pos, vel = reference_vectors(t, t_shift, scenario)
    return -scenario.gain @ (x - np.concatenate([pos, vel]))


def nominal_control(state: RelativeState, t: float, t_shift: float, scenario: Scenario) -> np.ndarray:
    """LQR tracking command saturated per axis to u_max."""
    u = lqr_command(state.vector(), t, t_shift, scenario)
    return np.clip(u, -scenario.u_max, scenario.u_max)


def constraint_margin(state: RelativeState, u: np.ndarray, scenario: Scenario) -> float:
    """Minimum constraint slack; positive iff every constraint holds strictly.

    ``u`` should be the unsaturated command so the actuation term can go
    negative and grade how badly the bound is exceeded.
    """
    return float(_margins_vec(state.vector()[None, :], np.asarray(u, dtype=float)[None, :], scenario)[0])


def _margins_vec(x: np.ndarray, u: np.ndarray, scenario: Scenario) -> np.ndarray:
    """Vectorized margin over rows of states (m, 6) and commands (m, 3)."""
    r = x[:, :3]
    rn = np.linalg.norm(r, axis=1)
    margin = scenario.u_max - np.max(np.abs(u), axis=1)
    # keep-out sphere, active while inside the approach gate
    keep_out = rn - scenario.keep_out_radius
    margin = np.where(rn <= scenario.approach_gate_radius, np.minimum(margin, keep_out), margin)
    # line-of-sight cone about the approach axis, scaled by range
    with np.errstate(invalid="ignore"):
        cos_angle = np.clip((r @ APPROACH_AXIS) / np.where(rn > 0, rn, 1.0), -1.0, 1.0)
    angle = np.arccos(cos_angle)
    cone = (scenario.cone_half_angle - angle) * rn
    return np.minimum(margin, cone)


@dataclass
class RolloutResult:
    times: np.ndarray
    states: np.ndarray  # (steps + 1, 6)
    controls: np.ndarray  # (steps, 3) as applied (saturated)
    margins: np.ndarray  # (steps + 1,) evaluated on the raw commands
    min_margin: float = field(init=False)

    def __post_init__(self) -> None:
        self.min_margin = float(self.margins.min())


def rollout(state0: RelativeState, t0: float, t_shift: float, scenario: Scenario, steps: int | None = None) -> RolloutResult:
    """Closed-loop simulation with a fixed shift; margins use raw commands."""
    steps = scenario.horizon_steps if steps is None else int(steps)
    if steps < 1:
        raise ValueError("steps must be >= 1")
    x = state0.vector()
    t = float(t0)
    times = np.empty(steps + 1)
    states = np.empty((steps + 1, 6))
    controls = np.empty((steps, 3))
    margins = np.empty(steps + 1)
    for i in range(steps):
        u_raw = lqr_command(x, t, t_shift, scenario)
        u = np.clip(u_raw, -scenario.u_max, scenario.u_max)
        times[i] = t
        states[i] = x
        controls[i] = u
        margins[i] = _margins_vec(x[None, :], u_raw[None, :], scenario)[0]
        x = scenario.ad @ x + scenario.bd @ u
        t += scenario.dt
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite state during rollout")
    u_raw = lqr_command(x, t, t_shift, scenario)
    times[steps] = t
    states[steps] = x
    margins[steps] = _margins_vec(x[None, :], u_raw[None, :], scenario)[0]
    return RolloutResult(times, states, controls, margins)


def rollout_min_margins(state0: RelativeState, t0: float, shifts: np.ndarray, scenario: Scenario, steps: int | None = None) -> np.ndarray:
    """Minimum rollout margin for many candidate shifts at once.

    Evaluates the same closed loop as :func:`rollout` with one state row per
    shift; used by dense feasibility scans.
    """
    shifts = np.asarray(shifts, dtype=float)
    steps = scenario.horizon_steps if steps is None else int(steps)
    m = shifts.size
    x = np.tile(state0.vector(), (m, 1))
    t = float(t0)
    mins = np.full(m, np.inf)
    for _ in range(steps):
        pos, vel = reference_vectors(t, shifts, scenario)
        ref = np.concatenate([pos, vel], axis=1)
        u_raw = -(x - ref) @ scenario.gain.T
        mins = np.minimum(mins, _margins_vec(x, u_raw, scenario))
        u = np.clip(u_raw, -scenario.u_max, scenario.u_max)
        x = x @ scenario.ad.T + u @ scenario.bd.T
        t += scenario.dt
    pos, vel = reference_vectors(t, shifts, scenario)
    ref = np.concatenate([pos, vel], axis=1)
    u_raw = -(x - ref) @ scenario.gain.T
    return np.minimum(mins, _margins_vec(x, u_raw, scenario))


# ---- configuration and export ------------------------------------------------

_SCALAR_FIELDS = [
    "mean_motion",
    "dt",
    "horizon_steps",
    "keep_out_radius",
    "cone_half_angle",
    "u_max",
    "q_pos",
    "q_vel",
    "r_ctrl",
    "ref_start_range",
    "closing_speed",
    "hold_range",
    "capture_radius",
    "approach_gate_radius",
    "max_mission_time",
    "governor_period_steps",
    "shift_min",
]


def scenario_to_dict(scenario: Scenario) -> dict:
    doc = {name: getattr(scenario, name) for name in _SCALAR_FIELDS}
    doc["initial_state"] = {
        "r": scenario.initial_state.r.tolist(),
        "v": scenario.initial_state.v.tolist(),
    }
    return doc


def scenario_from_dict(doc: dict, path: str = "scenario") -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError(f"{path}: expected an object")
    kwargs = {}
    for key, val in doc.items():
        if key == "initial_state":
            if not isinstance(val, dict) or set(val) - {"r", "v", "t"}:
                raise ScenarioError(f"{path}.initial_state: expected keys r, v")
            try:
                kwargs["initial_state"] = RelativeState(
                    np.asarray(val["r"], dtype=float),
                    np.asarray(val["v"], dtype=float),
                    float(val.get("t", 0.0)),
                )
            except (ValueError, KeyError, TypeError) as exc:
                raise ScenarioError(f"{path}.initial_state: {exc}") from exc
        elif key in _SCALAR_FIELDS:
            if isinstance(val, bool) or not isinstance(val, (int, float)):
                raise ScenarioError(f"{path}.{key}: expected a number, got {val!r}")
            kwargs[key] = int(val) if key in ("horizon_steps", "governor_period_steps") else float(val)
        else:
            raise ScenarioError(f"{path}.{key}: unknown field")
    try:
        return Scenario(**kwargs)
    except ScenarioError as exc:
        raise ScenarioError(f"{path}.{exc}") from exc


def load_scenario(path) -> Scenario:
    doc = load_json(path)
    if "scenario" in doc and isinstance(doc["scenario"], dict):
        doc = doc["scenario"]
    return scenario_from_dict(doc)


def trajectory_csv_rows(times, states, controls, margins):
    """Rows for the trajectory export (t, r, v, u, margin); final row has u=0."""
    rows = []
    for i in range(len(times)):
        u = controls[i] if i < len(controls) else np.zeros(3)
        rows.append((times[i], *states[i], *u, margins[i]))
    return rows


def write_trajectory_csv(path, result: RolloutResult) -> None:
    write_csv(path, TRAJECTORY_COLUMNS, trajectory_csv_rows(result.times, result.states, result.controls, result.margins))
