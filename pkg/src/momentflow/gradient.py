"""Moment-matching cost, feasibility barrier, and their analytic gradients.

The controller drives robot positions down the gradient of

    f(x) = sum_{k=2}^{s} (1/4k) * (m_k(x) - m_k*)^2,

optionally augmented by the interior barrier

    b(x) = sum_{k=2}^{s} (eps_k / 4k) * (m_k(x) - m_k*)^(-2),

which blows up as a moment approaches its target from above and thereby
keeps every margin m_k - m_k* positive along the flow.  The k = 1 terms are
omitted throughout: m_1 is identically zero for zero-diagonal weight
matrices, targets pin m_1* = 0, and eps_1 = 0 by convention.

All gradients here are exact.  The key identity, for a symmetric zero
diagonal A and i != j, is

    d tr(A^k) / d a_ij = 2k * [A^(k-1)]_ij,

which chains with d a_ij / d x_ir to give, per robot i and coordinate r,

    d m_k / d x_ir = -(2 k decay / n) * [(A o T_r) A^(k-1)]_ii,

where "o" is the entrywise product and T_r encodes the metric: for the
taxicab metric it is the sign matrix sign(x_ir - x_jr); for the Euclidean
metric it is the unit-direction matrix (x_ir - x_jr) / dist(i, j), taken as
zero for coincident pairs.  A central finite-difference oracle is included
so every analytic formula can be checked against a derivative-free
computation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

import numpy as np

from .network import (
    RobotConfiguration,
    WeightedAdjacency,
    build_adjacency,
    power_chain,
    spectral_moments,
)

if TYPE_CHECKING:  # pragma: no cover - import only for annotations
    from .scenarios import TargetSpectrum

__all__ = [
    "ControllerParams",
    "SignMatrix",
    "ControlField",
    "InfeasibleStateError",
    "DEFAULT_DECAY",
    "DEFAULT_EPSILON",
    "DEFAULT_FD_STEP",
    "default_epsilons",
    "sign_matrix",
    "coordinate_difference_matrix",
    "trace_derivative",
    "moment_gradient",
    "cost",
    "control_law",
    "barrier",
    "barrier_gradient",
    "finite_difference_gradient",
]

DEFAULT_DECAY = 1.0
# Barrier strength.  The stationary point of f + b sits at a margin of
# roughly eps**(1/4) per moment, which adds about sqrt(eps) * sum_k 1/(4k)
# to the reachable cost floor, so the convergence tolerance on f must sit
# above that floor.  1e-8 leaves the floor near 4e-5 for typical orders
# while keeping settled margins around 1e-2; much smaller values stiffen
# the barrier enough to stall an explicit integrator near the boundary.
DEFAULT_EPSILON = 1e-8
DEFAULT_FD_STEP = 1e-6


def default_epsilons(order: int) -> tuple[float, ...]:
    """Barrier constants (0, eps, ..., eps): index k-1 guards moment k.

    The leading zero disables the k = 1 term, which has no margin to guard.
    """
    if order < 2:
        raise ValueError(f"order must be at least 2, got {order}")
    return (0.0,) + (DEFAULT_EPSILON,) * (order - 1)


class InfeasibleStateError(RuntimeError):
    """A barrier-guarded moment margin is not strictly positive."""


@dataclass(frozen=True, eq=False)
class ControllerParams:
    """Fixed parameters of the moment controller.

    decay        positive weight-decay constant of the adjacency model
    metric       1 (taxicab) or 2 (Euclidean) inter-robot distance
    order        highest controlled moment s; moments 2..s are steered
    epsilons     s barrier constants, epsilons[k-1] guarding moment k;
                 entry 0 must be 0 and the rest nonnegative
    barrier_enabled   when False the barrier and its gradient are treated
                 as identically zero regardless of epsilons
    """

    decay: float = DEFAULT_DECAY
    metric: int = 1
    order: int = 2
    epsilons: tuple[float, ...] = ()
    barrier_enabled: bool = True

    def __post_init__(self) -> None:
        if not np.isfinite(self.decay) or self.decay <= 0.0:
            raise ValueError(f"decay must be a positive real, got {self.decay}")
        if self.metric not in (1, 2):
            raise ValueError(f"metric must be 1 or 2, got {self.metric}")
        if self.order < 2:
            raise ValueError(f"order must be at least 2, got {self.order}")
        eps = tuple(float(e) for e in self.epsilons) or default_epsilons(self.order)
        if len(eps) != self.order:
            raise ValueError(
                f"need {self.order} barrier constants, got {len(eps)}"
            )
        if eps[0] != 0.0:
            raise ValueError("the k=1 barrier constant must be zero")
        if any(not np.isfinite(e) or e < 0.0 for e in eps):
            raise ValueError("barrier constants must be finite and nonnegative")
        object.__setattr__(self, "epsilons", eps)

    def effective_epsilons(self) -> tuple[float, ...]:
        """Barrier constants actually applied (all zero when disabled)."""
        if self.barrier_enabled:
            return self.epsilons
        return (0.0,) * self.order


@dataclass(frozen=True, eq=False)
class SignMatrix:
    """Antisymmetric coordinate-ordering matrix for one axis.

    entries[i, j] = sign(x_ir - x_jr) in {-1, 0, +1} for axis r.  It is the
    exact derivative factor of |x_ir - x_jr| wherever that coordinate gap is
    nonzero.
    """

    entries: np.ndarray
    axis: int

    def __post_init__(self) -> None:
        ent = np.array(self.entries, dtype=float)
        if ent.ndim != 2 or ent.shape[0] != ent.shape[1]:
            raise ValueError(f"entries must be square, got shape {ent.shape}")
        if not np.all(np.isin(ent, (-1.0, 0.0, 1.0))):
            raise ValueError("sign entries must be -1, 0, or +1")
        if not np.array_equal(ent, -ent.T):
            raise ValueError("sign matrix must be antisymmetric")
        if self.axis < 0:
            raise ValueError(f"axis must be nonnegative, got {self.axis}")
        ent.setflags(write=False)
        object.__setattr__(self, "entries", ent)


@dataclass(frozen=True, eq=False)
class ControlField:
    """Commanded velocity u_ir for every robot i and coordinate r."""

    velocities: np.ndarray

    def __post_init__(self) -> None:
        vel = np.array(self.velocities, dtype=float)
        if vel.ndim != 2:
            raise ValueError(f"velocities must be an (n, d) array, got shape {vel.shape}")
        if not np.all(np.isfinite(vel)):
            raise ValueError("velocities must be finite")
        vel.setflags(write=False)
        object.__setattr__(self, "velocities", vel)

    @property
    def n(self) -> int:
        return self.velocities.shape[0]

    @property
    def d(self) -> int:
        return self.velocities.shape[1]


def sign_matrix(config: RobotConfiguration, axis: int) -> SignMatrix:
    """Sign matrix sign(x_ir - x_jr) for coordinate axis r.

    Ties produce exact zeros (sign(0) = 0), matching the subgradient
    convention used by the taxicab-metric gradients.
    """
    if not 0 <= axis < config.d:
        raise ValueError(f"axis {axis} out of range for d={config.d}")
    coords = config.positions[:, axis]
    return SignMatrix(np.sign(coords[:, None] - coords[None, :]), axis)


def coordinate_difference_matrix(config: RobotConfiguration, axis: int) -> np.ndarray:
    """Raw coordinate gaps x_ir - x_jr for axis r as an (n, n) array."""
    if not 0 <= axis < config.d:
        raise ValueError(f"axis {axis} out of range for d={config.d}")
    coords = config.positions[:, axis]
    return coords[:, None] - coords[None, :]


def _metric_factor(config: RobotConfiguration, params: ControllerParams, axis: int) -> np.ndarray:
    """Derivative factor T_r of dist w.r.t. coordinate r of the row robot.

    Taxicab metric: the sign matrix.  Euclidean metric: the unit-direction
    matrix (x_ir - x_jr) / dist(i, j) with zeros for coincident pairs.
    """
    diffs = coordinate_difference_matrix(config, axis)
    if params.metric == 1:
        return np.sign(diffs)
    full = config.positions[:, None, :] - config.positions[None, :, :]
    dist = np.sqrt((full**2).sum(axis=-1))
    return np.divide(diffs, dist, out=np.zeros_like(diffs), where=dist > 0.0)


def trace_derivative(adjacency: WeightedAdjacency, k: int, i: int, j: int) -> float:
    """Derivative of tr(A^k) with respect to the symmetric pair a_ij = a_ji.

    Equals 2k * [A^(k-1)]_ij for i != j: each of the k cyclic positions at
    which a length-k closed walk can traverse edge {i, j} contributes
    [A^(k-1)]_ij, and the symmetric entry doubles it.  For k = 1 the
    derivative is zero since the trace never touches off-diagonal entries.
    """
    n = adjacency.n
    if k < 1:
        raise ValueError(f"power k must be at least 1, got {k}")
    if not (0 <= i < n and 0 <= j < n):
        raise ValueError(f"indices ({i}, {j}) out of range for n={n}")
    if i == j:
        raise ValueError("diagonal entries are structurally zero; no derivative there")
    prev = power_chain(adjacency, k - 1)[k - 1]
    return 2.0 * k * prev[i, j]


def moment_gradient(config: RobotConfiguration, params: ControllerParams, k: int) -> np.ndarray:
    """Exact gradient of m_k with respect to every robot coordinate.

    Returns an (n, d) array G with

        G[i, r] = d m_k / d x_ir = -(2 k decay / n) * [(A o T_r) A^(k-1)]_ii.

    Valid for 2 <= k <= order; the formula assumes no coordinate ties under
    the taxicab metric and no coincident robots under the Euclidean metric
    (at such points the returned value is the natural subgradient choice
    with sign(0) = 0).
    """
    if not 2 <= k <= params.order:
        raise ValueError(f"moment index k={k} outside 2..{params.order}")
    if params.order > config.n:
        raise ValueError(
            f"order {params.order} exceeds robot count {config.n}"
        )
    adjacency = build_adjacency(config, params.decay, params.metric)
    prev = power_chain(adjacency, k - 1)[k - 1]
    mixed = adjacency.weights * prev
    grad = np.empty((config.n, config.d))
    scale = -2.0 * k * params.decay / config.n
    for axis in range(config.d):
        factor = _metric_factor(config, params, axis)
        grad[:, axis] = scale * np.einsum("ij,ij->i", mixed, factor)
    return grad


def _check_targets(targets: "TargetSpectrum", params: ControllerParams) -> np.ndarray:
    """Validate target/params order agreement and return the target array."""
    goal = np.asarray(targets.moments, dtype=float)
    if goal.shape != (params.order,):
        raise ValueError(
            f"targets carry {goal.shape[0] if goal.ndim == 1 else 'malformed'} "
            f"moments but params.order is {params.order}"
        )
    return goal


def cost(config: RobotConfiguration, targets: "TargetSpectrum", params: ControllerParams) -> float:
    """Moment-matching cost sum_{k=2}^{s} (m_k - m_k*)^2 / (4k).

    The k = 1 term is omitted: m_1 is identically zero and valid targets
    pin m_1* = 0, so it would contribute exactly nothing.
    """
    goal = _check_targets(targets, params)
    adjacency = build_adjacency(config, params.decay, params.metric)
    moments = spectral_moments(adjacency, params.order)
    total = 0.0
    for k in range(2, params.order + 1):
        resid = moments.values[k - 1] - goal[k - 1]
        total += resid * resid / (4.0 * k)
    return total


def control_law(
    config: RobotConfiguration, targets: "TargetSpectrum", params: ControllerParams
) -> ControlField:
    """Negative cost gradient u = -grad f as a per-robot velocity field.

    Expanding the chain rule and collecting the shared power chain gives

        u[i, r] = (decay / n) * [(A o T_r) W]_ii,
        W = sum_{k=2}^{s} (m_k - m_k*) A^(k-1),

    evaluated with one chain A^0..A^(s-1) per call.  The summation order
    over k is fixed, so results are bitwise reproducible.
    """
    goal = _check_targets(targets, params)
    adjacency = build_adjacency(config, params.decay, params.metric)
    chain = power_chain(adjacency, params.order)
    n = config.n
    weighted = np.zeros((n, n))
    for k in range(2, params.order + 1):
        resid = np.trace(chain[k]) / n - goal[k - 1]
        weighted += resid * chain[k - 1]
    mixed = adjacency.weights * weighted
    velocities = np.empty((n, config.d))
    scale = params.decay / n
    for axis in range(config.d):
        factor = _metric_factor(config, params, axis)
        velocities[:, axis] = scale * np.einsum("ij,ij->i", mixed, factor)
    return ControlField(velocities)


def barrier(config: RobotConfiguration, targets: "TargetSpectrum", params: ControllerParams) -> float:
    """Interior barrier sum_{k} (eps_k / 4k) * (m_k - m_k*)^(-2).

    Only terms with eps_k > 0 participate; with the barrier disabled or all
    constants zero the value is exactly 0.  Raises
    :class:`InfeasibleStateError` if any guarded margin is not strictly
    positive, since the barrier is defined only inside the feasible region.
    """
    goal = _check_targets(targets, params)
    eps = params.effective_epsilons()
    if all(e == 0.0 for e in eps):
        return 0.0
    adjacency = build_adjacency(config, params.decay, params.metric)
    moments = spectral_moments(adjacency, params.order)
    total = 0.0
    for k in range(2, params.order + 1):
        if eps[k - 1] == 0.0:
            continue
        margin = moments.values[k - 1] - goal[k - 1]
        if margin <= 0.0:
            raise InfeasibleStateError(
                f"barrier-guarded margin for moment {k} is {margin:.3e}; "
                "the state has left the feasible region"
            )
        total += eps[k - 1] / (4.0 * k * margin * margin)
    return total


def barrier_gradient(
    config: RobotConfiguration, targets: "TargetSpectrum", params: ControllerParams
) -> np.ndarray:
    """Exact gradient of the barrier with respect to robot coordinates.

    Composed from the moment gradients:

        grad b = sum_k -(eps_k / 2k) * (m_k - m_k*)^(-3) * grad m_k,

    again over guarded terms only, with the power chain shared across k
    exactly as in :func:`control_law`.  Returns an (n, d) array of zeros
    when the barrier is disabled or all constants vanish; raises
    :class:`InfeasibleStateError` on a nonpositive guarded margin.
    """
    goal = _check_targets(targets, params)
    eps = params.effective_epsilons()
    grad = np.zeros((config.n, config.d))
    if all(e == 0.0 for e in eps):
        return grad
    n = config.n
    adjacency = build_adjacency(config, params.decay, params.metric)
    chain = power_chain(adjacency, params.order)
    weighted = np.zeros((n, n))
    for k in range(2, params.order + 1):
        if eps[k - 1] == 0.0:
            continue
        margin = np.trace(chain[k]) / n - goal[k - 1]
        if margin <= 0.0:
            raise InfeasibleStateError(
                f"barrier-guarded margin for moment {k} is {margin:.3e}; "
                "the state has left the feasible region"
            )
        # -(eps/2k) margin^-3 multiplies grad m_k, whose own prefactor is
        # -(2 k decay / n); the 2k factors cancel against each other.
        weighted += (eps[k - 1] * params.decay / (n * margin**3)) * chain[k - 1]
    mixed = adjacency.weights * weighted
    for axis in range(config.d):
        factor = _metric_factor(config, params, axis)
        grad[:, axis] = np.einsum("ij,ij->i", mixed, factor)
    return grad


def finite_difference_gradient(
    scalar_field: Callable[[RobotConfiguration], float],
    config: RobotConfiguration,
    step: float = DEFAULT_FD_STEP,
) -> np.ndarray:
    """Central finite differences of a scalar field over robot coordinates.

    Perturbs one coordinate at a time by +-step and applies the second-order
    central quotient.  This is the derivative-free oracle used to verify
    every analytic gradient in this module; keep ``step`` well below the
    smallest coordinate gap so taxicab sign structure does not flip inside
    the stencil.
    """
    if not np.isfinite(step) or step <= 0.0:
        raise ValueError(f"step must be a positive real, got {step}")
    base = config.positions
    grad = np.empty_like(base)
    for i in range(config.n):
        for r in range(config.d):
            upper = base.copy()
            upper[i, r] += step
            lower = base.copy()
            lower[i, r] -= step
            grad[i, r] = (
                scalar_field(RobotConfiguration(upper))
                - scalar_field(RobotConfiguration(lower))
            ) / (2.0 * step)
    return grad
