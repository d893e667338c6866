"""Exact time-shift governor, the hybrid network-assisted governor, and
training-set generation.

The exact governor finds the feasible shift closest to zero by bisection
between a feasible anchor (the window's lower end) and the infeasible side,
re-verifying every answer by rollout.  The hybrid governor asks a trained
regressor for a candidate first and falls back to the exact solve in three
tiers: an in-window feasible candidate is accepted outright, an in-window
infeasible candidate narrows the search window to [previous shift,
candidate] before the exact solve, and an out-of-window candidate triggers
a full exact solve over the previous window.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .jsonio import write_csv
from .losses import LossSpec, transform_output
from .rendezvous import (
    RelativeState,
    Scenario,
    lqr_command,
    rollout,
    rollout_min_margins,
    step_dynamics,
    _margins_vec,
)

__all__ = [
    "TOL_SHIFT",
    "DENSE_RESOLUTION",
    "GovernorInfeasibleError",
    "ShiftWindow",
    "TsgSample",
    "TraceRow",
    "GovernorTrace",
    "MissionResult",
    "ScenarioFamily",
    "mission_features",
    "FEATURE_NAMES",
    "tsg_exact",
    "dense_boundary",
    "hybrid_step",
    "run_governed_mission",
    "generate_dataset",
    "DatasetResult",
    "write_dataset_csv",
    "read_dataset_csv",
    "TRACE_COLUMNS",
    "write_trace_csv",
]

TOL_SHIFT = 0.1  # bisection tolerance, seconds
DENSE_RESOLUTION = 0.01  # dense-scan resolution, seconds

MODE_EXACT = "exact"
MODE_HYBRID = "hybrid"

TRACE_COLUMNS = [
    "update",
    "time",
    "r_x",
    "r_y",
    "r_z",
    "v_x",
    "v_y",
    "v_z",
    "candidate",
    "accepted",
    "branch",
    "oracle_rollouts",
    "verify_rollouts",
]

FEATURE_NAMES = [
    "r_x_scaled",
    "r_y_scaled",
    "r_z_scaled",
    "v_x_scaled",
    "v_y_scaled",
    "v_z_scaled",
    "range_scaled",
    "time_fraction",
]


class GovernorInfeasibleError(RuntimeError):
    """No feasible shift in the window; carries the anchor margin profile."""

    def __init__(self, message: str, window: "ShiftWindow", margins: np.ndarray | None = None):
        super().__init__(message)
        self.window = window
        self.margins = margins


@dataclass(frozen=True)
class ShiftWindow:
    """Closed shift interval [lo, hi] with hi <= 0."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not (self.lo <= self.hi <= 0.0):
            raise ValueError(f"shift window needs lo <= hi <= 0, got [{self.lo}, {self.hi}]")

    def contains(self, shift: float) -> bool:
        return self.lo <= shift <= self.hi


@dataclass
class TsgSample:
    """One supervised pair: scenario-normalized features and the optimal shift."""

    features: np.ndarray
    t_star: float


@dataclass
class TraceRow:
    update: int
    time: float
    state: np.ndarray
    candidate: float  # nan when no network was consulted
    accepted: float
    branch: str  # init | nn | narrowed | outside | exact
    oracle_rollouts: int
    verify_rollouts: int
    wall_time: float


@dataclass
class GovernorTrace:
    rows: list[TraceRow] = field(default_factory=list)

    @property
    def oracle_rollouts(self) -> int:
        return sum(r.oracle_rollouts for r in self.rows)

    @property
    def verify_rollouts(self) -> int:
        return sum(r.verify_rollouts for r in self.rows)

    @property
    def nn_accept_rate(self) -> float:
        consulted = [r for r in self.rows if r.branch != "init"]
        if not consulted:
            return 0.0
        return sum(1 for r in consulted if r.branch == "nn") / len(consulted)

    def accepted_shifts(self) -> np.ndarray:
        return np.array([r.accepted for r in self.rows])


def mission_features(state: RelativeState, t: float, scenario: Scenario) -> np.ndarray:
    """Scenario-normalized state features plus range and phase."""
    ps = scenario.ref_start_range
    vs = max(scenario.closing_speed, 1e-12)
    return np.concatenate(
        [
            state.r / ps,
            state.v / vs,
            [np.linalg.norm(state.r) / ps, t / scenario.max_mission_time],
        ]
    )


def feature_normalization(scenario: Scenario) -> dict:
    return {
        "position_scale": scenario.ref_start_range,
        "velocity_scale": max(scenario.closing_speed, 1e-12),
        "time_scale": scenario.max_mission_time,
    }


# ---- exact governor ---------------------------------------------------------


def _solve_window(
    state: RelativeState,
    t: float,
    window: ShiftWindow,
    scenario: Scenario,
    tol: float = TOL_SHIFT,
    dense_fallback: bool = True,
) -> tuple[float, int]:
    """Closest-to-zero feasible shift in the window plus rollout count."""
    calls = 0

    def feasible(shift: float) -> bool:
        nonlocal calls
        calls += 1
        return rollout(state, t, shift, scenario).min_margin > 0.0

    if feasible(window.hi):
        return window.hi, calls
    if window.lo == window.hi:
        res = rollout(state, t, window.lo, scenario)
        raise GovernorInfeasibleError(
            f"degenerate window at {window.lo:.3f} s is infeasible", window, res.margins
        )
    if not feasible(window.lo):
        if dense_fallback:
            shift, scanned = _dense_search(state, t, window, scenario)
            calls += scanned
            if shift is not None:
                return shift, calls
        res = rollout(state, t, window.lo, scenario)
        raise GovernorInfeasibleError(
            f"window [{window.lo:.3f}, {window.hi:.3f}] s has an infeasible anchor "
            f"(min margin {res.min_margin:.6g})",
            window,
            res.margins,
        )
    lo, hi = window.lo, window.hi  # lo feasible, hi infeasible
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo, calls


def _dense_search(state: RelativeState, t: float, window: ShiftWindow, scenario: Scenario):
    """Coarse-then-fine grid scan; handles non-monotone feasible sets.

    Returns (shift, rollouts_scanned) with shift None when nothing in the
    window is feasible.
    """
    coarse = np.arange(window.lo, window.hi + TOL_SHIFT / 2, TOL_SHIFT)
    coarse = coarse[coarse <= window.hi]
    if coarse.size == 0 or coarse[-1] < window.hi:
        coarse = np.append(coarse, window.hi)
    mins = rollout_min_margins(state, t, coarse, scenario)
    scanned = coarse.size
    feas = np.flatnonzero(mins > 0)
    if feas.size == 0:
        return None, scanned
    best = coarse[feas[-1]]
    upper = min(best + TOL_SHIFT, window.hi)
    fine = np.arange(best, upper + DENSE_RESOLUTION / 2, DENSE_RESOLUTION)
    fine = fine[fine <= window.hi]
    mins_fine = rollout_min_margins(state, t, fine, scenario)
    scanned += fine.size
    feas_fine = np.flatnonzero(mins_fine > 0)
    return float(fine[feas_fine[-1]]), scanned


def tsg_exact(
    state: RelativeState,
    t: float,
    window: ShiftWindow,
    scenario: Scenario,
    tol: float = TOL_SHIFT,
) -> float:
    """Largest (closest-to-zero) feasible shift in the window.

    Bisection between the feasible anchor at ``window.lo`` and the infeasible
    side, returning the feasible end of the final bracket; ``window.hi`` is
    returned outright when it is itself feasible.
    """
    shift, _ = _solve_window(state, t, window, scenario, tol)
    return shift


def dense_boundary(
    state: RelativeState,
    t: float,
    window: ShiftWindow,
    scenario: Scenario,
    resolution: float = DENSE_RESOLUTION,
) -> float:
    """Independent dense-grid answer: closest-to-zero feasible shift."""
    shifts = np.arange(window.lo, window.hi + resolution / 2, resolution)
    shifts = np.minimum(shifts, window.hi)
    mins = rollout_min_margins(state, t, shifts, scenario)
    feas = np.flatnonzero(mins > 0)
    if feas.size == 0:
        raise GovernorInfeasibleError("no feasible shift on the dense grid", window)
    return float(shifts[feas[-1]])


# ---- hybrid governor ---------------------------------------------------------


@dataclass
class HybridOutcome:
    accepted: float
    window: ShiftWindow
    candidate: float
    branch: str
    oracle_rollouts: int
    verify_rollouts: int


def hybrid_step(
    state: RelativeState,
    t: float,
    window_prev: ShiftWindow,
    net,
    spec: LossSpec,
    scenario: Scenario,
) -> HybridOutcome:
    """One network-first governor update with exact fallback."""
    raw = float(net.predict(mission_features(state, t, scenario)[None, :])[0])
    candidate = float(transform_output(raw, spec))
    if window_prev.contains(candidate):
        verify = rollout(state, t, candidate, scenario)
        if verify.min_margin > 0.0:
            accepted, branch, oracle = candidate, "nn", 0
        else:
            narrowed = ShiftWindow(
                min(window_prev.lo, candidate), max(window_prev.lo, candidate)
            )
            accepted, oracle = _solve_window(state, t, narrowed, scenario)
            branch = "narrowed"
        verify_calls = 1
    else:
        accepted, oracle = _solve_window(state, t, window_prev, scenario)
        branch, verify_calls = "outside", 0
    return HybridOutcome(accepted, ShiftWindow(accepted, 0.0), candidate, branch, oracle, verify_calls)


# ---- governed missions ---------------------------------------------------------


@dataclass
class MissionResult:
    trace: GovernorTrace
    times: np.ndarray
    states: np.ndarray  # (n+1, 6)
    controls: np.ndarray  # (n, 3), saturated as applied
    margins: np.ndarray  # (n,), realized margins on the raw commands
    status: str  # captured | timeout
    mission_time: float
    violations: int


def run_governed_mission(
    scenario: Scenario,
    mode: str = MODE_EXACT,
    net=None,
    spec: LossSpec | None = None,
) -> MissionResult:
    """Fly one constrained approach under the chosen governor mode.

    The first shift always comes from the exact solve over
    [scenario.shift_min, 0]; afterwards the governor updates every
    ``governor_period_steps`` simulation steps.
    """
    if mode not in (MODE_EXACT, MODE_HYBRID):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == MODE_HYBRID and (net is None or spec is None):
        raise ValueError("hybrid mode needs a trained network and a loss spec")

    state = scenario.initial_state
    t = 0.0
    trace = GovernorTrace()

    wall = time.perf_counter()
    accepted, oracle = _solve_window(state, t, ShiftWindow(scenario.shift_min, 0.0), scenario)
    trace.rows.append(
        TraceRow(0, t, state.vector(), float("nan"), accepted, "init", oracle, 0, time.perf_counter() - wall)
    )
    window = ShiftWindow(accepted, 0.0)

    times = [t]
    states = [state.vector()]
    controls: list[np.ndarray] = []
    margins: list[float] = []
    step = 0
    update = 0
    while t < scenario.max_mission_time and np.linalg.norm(state.r) > scenario.capture_radius:
        if step > 0 and step % scenario.governor_period_steps == 0:
            update += 1
            wall = time.perf_counter()
            if mode == MODE_HYBRID:
                out = hybrid_step(state, t, window, net, spec, scenario)
                window = out.window
                trace.rows.append(
                    TraceRow(
                        update,
                        t,
                        state.vector(),
                        out.candidate,
                        out.accepted,
                        out.branch,
                        out.oracle_rollouts,
                        out.verify_rollouts,
                        time.perf_counter() - wall,
                    )
                )
            else:
                accepted, oracle = _solve_window(state, t, window, scenario)
                window = ShiftWindow(accepted, 0.0)
                trace.rows.append(
                    TraceRow(update, t, state.vector(), float("nan"), accepted, "exact", oracle, 0, time.perf_counter() - wall)
                )
        u_raw = lqr_command(state.vector(), t, window.lo, scenario)
        u = np.clip(u_raw, -scenario.u_max, scenario.u_max)
        margins.append(float(_margins_vec(state.vector()[None, :], u_raw[None, :], scenario)[0]))
        controls.append(u)
        state = step_dynamics(state, u, scenario)
        t = state.t
        times.append(t)
        states.append(state.vector())
        step += 1

    status = "captured" if np.linalg.norm(state.r) <= scenario.capture_radius else "timeout"
    margins_arr = np.asarray(margins)
    return MissionResult(
        trace=trace,
        times=np.asarray(times),
        states=np.asarray(states),
        controls=np.asarray(controls) if controls else np.zeros((0, 3)),
        margins=margins_arr,
        status=status,
        mission_time=t,
        violations=int(np.count_nonzero(margins_arr <= 0.0)),
    )


# ---- dataset generation ---------------------------------------------------------


@dataclass
class ScenarioFamily:
    """Sampler over initial conditions around a base scenario."""

    base: Scenario = field(default_factory=Scenario)
    range_lo: float = 1770.0
    range_hi: float = 1830.0
    lateral_jitter: float = 25.0
    vertical_jitter: float = 25.0
    velocity_jitter: float = 0.01

    def sample_scenario(self, rng: np.random.Generator) -> Scenario:
        y0 = rng.uniform(self.range_lo, self.range_hi)
        x0 = rng.uniform(-self.lateral_jitter, self.lateral_jitter)
        z0 = rng.uniform(-self.vertical_jitter, self.vertical_jitter)
        v = np.array([0.0, -self.base.closing_speed, 0.0]) + rng.uniform(
            -self.velocity_jitter, self.velocity_jitter, 3
        )
        state = RelativeState(np.array([x0, y0, z0]), v)
        return self.base.with_initial_state(state)

    def to_dict(self) -> dict:
        return {
            "range_lo": self.range_lo,
            "range_hi": self.range_hi,
            "lateral_jitter": self.lateral_jitter,
            "vertical_jitter": self.vertical_jitter,
            "velocity_jitter": self.velocity_jitter,
        }


@dataclass
class DatasetResult:
    features: np.ndarray  # (n, d)
    t_star: np.ndarray  # (n,)
    missions: int
    skipped_infeasible: int
    meta: dict

    def samples(self) -> list[TsgSample]:
        return [TsgSample(self.features[i], float(self.t_star[i])) for i in range(self.t_star.size)]


def generate_dataset(family: ScenarioFamily, count: int, seed: int) -> DatasetResult:
    """Run exact-governed missions and harvest (features, shift) pairs.

    Every governor update with a strictly negative accepted shift becomes one
    sample.  Missions whose initial window is infeasible are skipped and
    counted.  Deterministic for a fixed seed.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    feats: list[np.ndarray] = []
    targets: list[float] = []
    missions = 0
    skipped = 0
    while len(targets) < count:
        scenario = family.sample_scenario(rng)
        missions += 1
        try:
            result = run_governed_mission(scenario, MODE_EXACT)
        except GovernorInfeasibleError:
            skipped += 1
            continue
        for row in result.trace.rows:
            if row.accepted < 0.0:
                state = RelativeState.from_vector(row.state, row.time)
                feats.append(mission_features(state, row.time, scenario))
                targets.append(row.accepted)
    features = np.asarray(feats)[:count]
    t_star = np.asarray(targets)[:count]
    meta = {
        "seed": seed,
        "count": int(count),
        "missions": missions,
        "skipped_infeasible": skipped,
        "family": family.to_dict(),
        "scenario": None,  # filled by the CLI with the full scenario dict
        "feature_names": FEATURE_NAMES,
        "feature_normalization": feature_normalization(family.base),
    }
    return DatasetResult(features, t_star, missions, skipped, meta)


def write_dataset_csv(path, features: np.ndarray, t_star: np.ndarray) -> None:
    header = [f"feature_{i}" for i in range(features.shape[1])] + ["t_star"]
    rows = [(*features[i], t_star[i]) for i in range(features.shape[0])]
    write_csv(path, header, rows)


def read_dataset_csv(path) -> tuple[np.ndarray, np.ndarray]:
    from .jsonio import read_csv

    header, rows = read_csv(path)
    if not header or header[-1] != "t_star" or not header[0].startswith("feature_"):
        raise ValueError(f"{path}: not a shift dataset (columns {header[:3]}...)")
    data = np.asarray([[float(v) for v in row] for row in rows])
    if data.size == 0:
        return np.zeros((0, len(header) - 1)), np.zeros(0)
    return data[:, :-1], data[:, -1]


def write_trace_csv(path, trace: GovernorTrace) -> None:
    rows = []
    for r in trace.rows:
        rows.append(
            (r.update, r.time, *r.state, r.candidate, r.accepted, r.branch, r.oracle_rollouts, r.verify_rollouts)
        )
    write_csv(path, TRACE_COLUMNS, rows)
