"""Closed-loop gradient flow of robot positions toward target moments.

The continuous dynamics are x_dot = -grad(f + b): the moment-matching cost
plus the interior barrier from :mod:`momentflow.gradient`.  Integration is
explicit first order with an accept/reject rule that enforces, in discrete
time, the two properties the continuous flow has for free: the state stays
inside the feasible region

    F = { x : m_k(x) > m_k*  for every k = 2..s },

and f + b never increases.  A trial step that violates either property is
rejected and the step size halved; five consecutive acceptances double it
back up to its initial value.  If the step size bottoms out at its floor
and the trial step is still rejected, the flow has stalled.

Feasible starting points always exist whenever each target sits strictly
below its coincident-configuration ceiling: contracting the team toward its
centroid scales every pairwise distance by the same factor, which raises
every weight and hence every moment of order >= 2, so moments approach the
complete-graph values from below.  ``ensure_feasible`` applies exactly that
compression.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .gradient import (
    ControllerParams,
    barrier,
    barrier_gradient,
    control_law,
    cost,
)
from .network import (
    MomentVector,
    RobotConfiguration,
    build_adjacency,
    complete_graph_moments,
    eigenvalues,
    spectral_moments,
)

if TYPE_CHECKING:  # pragma: no cover - import only for annotations
    from .scenarios import Scenario, TargetSpectrum

__all__ = [
    "SimulationSettings",
    "TrajectorySample",
    "TrajectoryRecord",
    "UnrealizableTargetsError",
    "FlowStalled",
    "feasibility_margin",
    "ensure_feasible",
    "step",
    "simulate",
    "DEFAULT_DT",
    "DEFAULT_MIN_STEP",
    "DEFAULT_COST_TOLERANCE",
    "DEFAULT_MAX_TIME",
    "DEFAULT_RECORD_EVERY",
]

logger = logging.getLogger(__name__)

DEFAULT_DT = 0.05
DEFAULT_MIN_STEP = 1e-8
# The barrier puts a floor of about sqrt(eps) * sum_k 1/(4k) under the
# reachable cost (see momentflow.gradient.DEFAULT_EPSILON); the default
# tolerance sits a comfortable factor above that floor so barrier-guarded
# runs terminate instead of stalling against it.
DEFAULT_COST_TOLERANCE = 1e-4
DEFAULT_MAX_TIME = 1e4
DEFAULT_RECORD_EVERY = 10

# Accept/reject bookkeeping: how many consecutive acceptances earn a step
# doubling, and the contraction factor used by ensure_feasible.
_ACCEPTS_PER_DOUBLING = 5
_COMPRESSION_FACTOR = 0.9
_MAX_COMPRESSIONS = 5000


class UnrealizableTargetsError(ValueError):
    """A moment target is at or above its coincident-configuration ceiling."""


class FlowStalled(RuntimeError):
    """No acceptable step exists even at the minimum step size."""


@dataclass(frozen=True, eq=False)
class SimulationSettings:
    """Integrator knobs for the closed-loop flow.

    dt              initial (and maximum) step size
    max_time        simulated-time horizon
    cost_tolerance  stop once the cost falls to or below this value
    min_step        floor for the adaptive step size
    record_every    sample the trajectory every this many accepted steps
    """

    dt: float = DEFAULT_DT
    max_time: float = DEFAULT_MAX_TIME
    cost_tolerance: float = DEFAULT_COST_TOLERANCE
    min_step: float = DEFAULT_MIN_STEP
    record_every: int = DEFAULT_RECORD_EVERY

    def __post_init__(self) -> None:
        if not np.isfinite(self.dt) or self.dt <= 0.0:
            raise ValueError(f"dt must be a positive real, got {self.dt}")
        if not np.isfinite(self.min_step) or self.min_step <= 0.0:
            raise ValueError(f"min_step must be a positive real, got {self.min_step}")
        if self.min_step > self.dt:
            raise ValueError(
                f"min_step {self.min_step} must not exceed dt {self.dt}"
            )
        if not np.isfinite(self.max_time) or self.max_time <= 0.0:
            raise ValueError(f"max_time must be a positive real, got {self.max_time}")
        if not np.isfinite(self.cost_tolerance) or self.cost_tolerance <= 0.0:
            raise ValueError(
                f"cost_tolerance must be a positive real, got {self.cost_tolerance}"
            )
        if self.record_every < 1:
            raise ValueError(f"record_every must be at least 1, got {self.record_every}")


@dataclass(frozen=True, eq=False)
class TrajectorySample:
    """State snapshot at one accepted instant of the flow."""

    t: float
    configuration: RobotConfiguration
    moments: MomentVector
    cost: float
    barrier: float


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    """Complete outcome of one simulation run.

    ``termination_reason`` is one of "converged" (cost reached tolerance),
    "horizon" (simulated time hit max_time first), or "stalled" (no
    acceptable step at the minimum step size).  ``samples`` always contains
    the initial state and the final state; intermediate samples appear
    every ``record_every`` accepted steps.
    """

    samples: tuple[TrajectorySample, ...]
    final_configuration: RobotConfiguration
    final_moments: MomentVector
    final_eigenvalues: np.ndarray
    termination_reason: str
    accepted_steps: int
    rejected_steps: int
    simulated_time: float

    def __post_init__(self) -> None:
        if self.termination_reason not in ("converged", "horizon", "stalled"):
            raise ValueError(
                f"unknown termination reason {self.termination_reason!r}"
            )
        if not self.samples:
            raise ValueError("a trajectory record needs at least one sample")
        eigs = np.array(self.final_eigenvalues, dtype=float)
        eigs.setflags(write=False)
        object.__setattr__(self, "final_eigenvalues", eigs)
        object.__setattr__(self, "samples", tuple(self.samples))


def feasibility_margin(
    config: RobotConfiguration, targets: "TargetSpectrum", params: ControllerParams
) -> np.ndarray:
    """Margins m_k(x) - m_k* for k = 2..order, in that order.

    All entries strictly positive means the state is feasible.
    """
    goal = np.asarray(targets.moments, dtype=float)
    if goal.shape != (params.order,):
        raise ValueError(
            f"targets carry {goal.size} moments but params.order is {params.order}"
        )
    adjacency = build_adjacency(config, params.decay, params.metric)
    moments = spectral_moments(adjacency, params.order)
    return moments.values[1:] - goal[1:]


def ensure_feasible(
    config: RobotConfiguration,
    targets: "TargetSpectrum",
    params: ControllerParams,
    slack_fraction: float = 0.1,
    slack_floor: float = 1e-3,
) -> RobotConfiguration:
    """Return a feasible configuration, compressing toward the centroid if needed.

    First verifies realizability: every target must sit strictly below the
    coincident-configuration moment for its order, else
    :class:`UnrealizableTargetsError`.  A configuration whose margins all
    clear a per-moment slack is returned unchanged; otherwise positions are
    repeatedly pulled toward their centroid by a fixed factor, which
    monotonically raises every moment of order >= 2 toward its ceiling.

    The slack for moment k is min(max(slack_fraction * |m_k*|, slack_floor),
    half the gap between target and ceiling); the cap keeps the demand
    strictly attainable, so the compression loop always terminates.
    """
    if slack_fraction < 0.0 or slack_floor < 0.0:
        raise ValueError("slack parameters must be nonnegative")
    goal = np.asarray(targets.moments, dtype=float)
    if goal.shape != (params.order,):
        raise ValueError(
            f"targets carry {goal.size} moments but params.order is {params.order}"
        )
    ceilings = complete_graph_moments(config.n, params.order).values
    gaps = ceilings[1:] - goal[1:]
    if np.any(gaps <= 0.0):
        bad = int(np.argmax(gaps <= 0.0)) + 2
        raise UnrealizableTargetsError(
            f"target moment m_{bad}* = {goal[bad - 1]:.6g} is not strictly below "
            f"its coincident-configuration ceiling {ceilings[bad - 1]:.6g} "
            f"for n={config.n}"
        )
    slack = np.minimum(
        np.maximum(slack_fraction * np.abs(goal[1:]), slack_floor), 0.5 * gaps
    )
    current = config
    for _ in range(_MAX_COMPRESSIONS):
        margins = feasibility_margin(current, targets, params)
        if np.all(margins >= slack):
            return current
        centroid = current.positions.mean(axis=0)
        pulled = centroid + _COMPRESSION_FACTOR * (current.positions - centroid)
        current = RobotConfiguration(pulled)
    raise RuntimeError(
        "centroid compression failed to reach the requested slack; "
        "this indicates a numerical degeneracy in the configuration"
    )


def _potential(
    config: RobotConfiguration, targets: "TargetSpectrum", params: ControllerParams
) -> tuple[float, float]:
    """Cost and barrier at ``config`` as a pair."""
    return (
        cost(config, targets, params),
        barrier(config, targets, params),
    )


def step(
    config: RobotConfiguration,
    targets: "TargetSpectrum",
    params: ControllerParams,
    settings: SimulationSettings,
    dt: float,
) -> tuple[RobotConfiguration, bool, float]:
    """One explicit trial step of the flow with the accept/reject rule.

    Computes the drift -grad(f + b) at ``config``, forms the candidate
    x + dt * drift, and accepts it iff the candidate is feasible (every
    margin strictly positive) and does not increase f + b.  A candidate so
    extreme that some inter-robot weight underflows to zero cannot be
    represented (weights are strictly positive) and is likewise rejected.
    Returns ``(new_config, accepted, next_dt)``: on acceptance the candidate
    and the unchanged dt; on rejection the original configuration and dt
    halved, clamped to ``settings.min_step``.  If dt is already at the
    floor and the trial still fails, raises :class:`FlowStalled`.
    """
    if not np.isfinite(dt) or dt <= 0.0:
        raise ValueError(f"dt must be a positive real, got {dt}")
    drift = control_law(config, targets, params).velocities - barrier_gradient(
        config, targets, params
    )
    try:
        candidate = RobotConfiguration(config.positions + dt * drift)
        feasible = bool(np.all(feasibility_margin(candidate, targets, params) > 0.0))
    except ValueError:
        candidate = config
        feasible = False
    if feasible:
        cost_now, barrier_now = _potential(config, targets, params)
        cost_new, barrier_new = _potential(candidate, targets, params)
        if cost_new + barrier_new <= cost_now + barrier_now:
            return candidate, True, dt
    if dt <= settings.min_step:
        raise FlowStalled(
            f"no acceptable step at the minimum step size {settings.min_step:g}"
        )
    return config, False, max(dt / 2.0, settings.min_step)


def _ordering_signature(config: RobotConfiguration) -> list[np.ndarray]:
    """Per-axis pairwise ordering (sign pattern) of robot coordinates."""
    return [
        np.sign(config.positions[:, r, None] - config.positions[None, :, r])
        for r in range(config.d)
    ]


def simulate(scenario: "Scenario") -> TrajectoryRecord:
    """Integrate the closed loop for one scenario to termination.

    The starting configuration comes from the scenario (explicit positions
    or a seeded random draw) and is made feasible first; unrealizable
    targets surface as :class:`UnrealizableTargetsError` before any
    integration happens.  Runs until the cost reaches the tolerance
    ("converged"), simulated time reaches the horizon ("horizon"), or no
    acceptable step exists at the minimum step size ("stalled"); a stall is
    reported in the record rather than raised.

    Identical scenarios produce bitwise-identical records: every quantity
    is computed by fixed-order numpy expressions from the seeded start.
    """
    params = scenario.params
    targets = scenario.targets
    settings = scenario.settings
    config = ensure_feasible(scenario.initial_configuration(), targets, params)
    initial_ordering = _ordering_signature(config)

    def snapshot(t: float, cfg: RobotConfiguration) -> TrajectorySample:
        adjacency = build_adjacency(cfg, params.decay, params.metric)
        moments = spectral_moments(adjacency, params.order)
        return TrajectorySample(
            t=t,
            configuration=cfg,
            moments=moments,
            cost=cost(cfg, targets, params),
            barrier=barrier(cfg, targets, params),
        )

    t = 0.0
    dt = settings.dt
    accepted = 0
    rejected = 0
    streak = 0
    samples = [snapshot(t, config)]
    current_cost = samples[0].cost
    reason = None
    while True:
        if current_cost <= settings.cost_tolerance:
            reason = "converged"
            break
        if t >= settings.max_time:
            reason = "horizon"
            break
        try:
            config_next, ok, dt_next = step(config, targets, params, settings, dt)
        except FlowStalled:
            reason = "stalled"
            break
        if ok:
            config = config_next
            t += dt
            accepted += 1
            streak += 1
            if streak >= _ACCEPTS_PER_DOUBLING:
                dt = min(2.0 * dt, settings.dt)
                streak = 0
            current_cost = cost(config, targets, params)
            if accepted % settings.record_every == 0:
                samples.append(snapshot(t, config))
        else:
            dt = dt_next
            rejected += 1
            streak = 0

    if samples[-1].configuration is not config or samples[-1].t != t:
        samples.append(snapshot(t, config))

    final_ordering = _ordering_signature(config)
    flipped = sum(
        int(np.sum(a != b)) // 2
        for a, b in zip(initial_ordering, final_ordering)
    )
    if flipped:
        logger.info(
            "coordinate ordering changed for %d robot pair slots during the run",
            flipped,
        )

    final_adjacency = build_adjacency(config, params.decay, params.metric)
    return TrajectoryRecord(
        samples=tuple(samples),
        final_configuration=config,
        final_moments=spectral_moments(final_adjacency, params.order),
        final_eigenvalues=eigenvalues(final_adjacency),
        termination_reason=reason,
        accepted_steps=accepted,
        rejected_steps=rejected,
        simulated_time=t,
    )
