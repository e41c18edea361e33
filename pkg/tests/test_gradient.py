"""
Unit tests for the cost, barrier, and analytic gradient machinery.

Core claims:
    - ControllerParams validates decay, metric, order, and barrier constants
    - sign_matrix is antisymmetric with entries in {-1, 0, +1} and exact
      zeros on coordinate ties
    - trace_derivative matches a central finite difference of tr(A^k) under
      a symmetric entry bump
    - moment_gradient matches the finite-difference oracle for both metrics
    - cost is the hand formula, zero exactly at the target, and control_law
      equals its negative gradient (checked against finite differences and
      against an independent assembly from per-moment gradients)
    - barrier matches the hand formula, is exactly zero when disabled, and
      refuses nonpositive margins; barrier_gradient matches finite
      differences and the per-moment assembly
    - finite_difference_gradient is second-order accurate on a known field
"""

import numpy as np
import pytest
from pytest import approx

from momentflow.gradient import (
    DEFAULT_EPSILON,
    ControlField,
    ControllerParams,
    InfeasibleStateError,
    SignMatrix,
    barrier,
    barrier_gradient,
    control_law,
    coordinate_difference_matrix,
    cost,
    default_epsilons,
    finite_difference_gradient,
    moment_gradient,
    sign_matrix,
    trace_derivative,
)
from momentflow.network import (
    RobotConfiguration,
    WeightedAdjacency,
    build_adjacency,
    spectral_moments,
)
from momentflow.scenarios import TargetSpectrum


# -- Helpers -----------------------------------------------------------------

def _tie_free_config(n, d, seed):
    """Random positions with every per-axis coordinate gap at least 0.4/n.

    Each axis gets a jittered permutation of an evenly spaced grid, so no
    two robots share a coordinate and finite-difference stencils of step
    1e-6 never flip a taxicab sign.
    """
    rng = np.random.default_rng(seed)
    positions = np.empty((n, d))
    for axis in range(d):
        grid = (rng.permutation(n) + 0.5) / n
        positions[:, axis] = grid + rng.uniform(-0.3 / n, 0.3 / n, size=n)
    return RobotConfiguration(positions)


def _params(metric=2, order=4, **kwargs):
    return ControllerParams(decay=1.0, metric=metric, order=order, **kwargs)


def _targets_below(config, params, fraction=0.7):
    """Targets at ``fraction`` of the configuration's own moments.

    Margins are positive by construction, so barrier calls are feasible.
    """
    adjacency = build_adjacency(config, params.decay, params.metric)
    moments = spectral_moments(adjacency, params.order).values
    return TargetSpectrum(fraction * moments)


def _norm_close(actual, expected, tol):
    scale = max(np.linalg.norm(expected), 1e-12)
    return np.linalg.norm(actual - expected) / scale <= tol


# == 1. ControllerParams =====================================================

class TestControllerParams:
    def test_defaults(self):
        params = ControllerParams()
        assert params.decay == 1.0
        assert params.metric == 1
        assert params.order == 2
        assert params.epsilons == (0.0, DEFAULT_EPSILON)
        assert params.barrier_enabled

    def test_default_epsilons_shape(self):
        eps = default_epsilons(5)
        assert len(eps) == 5
        assert eps[0] == 0.0
        assert all(e == DEFAULT_EPSILON for e in eps[1:])
        with pytest.raises(ValueError):
            default_epsilons(1)

    def test_explicit_epsilons_kept(self):
        params = _params(order=3, epsilons=(0.0, 1e-6, 2e-6))
        assert params.epsilons == (0.0, 1e-6, 2e-6)

    def test_effective_epsilons_respect_disable(self):
        params = _params(order=3, barrier_enabled=False)
        assert params.effective_epsilons() == (0.0, 0.0, 0.0)
        assert params.epsilons[1] == DEFAULT_EPSILON

    def test_rejects_bad_decay(self):
        for decay in (0.0, -1.0, np.nan):
            with pytest.raises(ValueError):
                ControllerParams(decay=decay)

    def test_rejects_bad_metric(self):
        with pytest.raises(ValueError):
            ControllerParams(metric=3)

    def test_rejects_low_order(self):
        with pytest.raises(ValueError):
            ControllerParams(order=1)

    def test_rejects_bad_epsilons(self):
        with pytest.raises(ValueError):
            _params(order=3, epsilons=(0.0, 1e-6))  # wrong length
        with pytest.raises(ValueError):
            _params(order=3, epsilons=(1e-6, 1e-6, 1e-6))  # k=1 not zero
        with pytest.raises(ValueError):
            _params(order=3, epsilons=(0.0, -1e-6, 1e-6))
        with pytest.raises(ValueError):
            _params(order=3, epsilons=(0.0, np.inf, 1e-6))


# == 2. Sign and difference matrices =========================================

class TestSignMatrix:
    def test_values_and_antisymmetry(self):
        config = _tie_free_config(6, 2, 0)
        for axis in range(2):
            signs = sign_matrix(config, axis)
            assert signs.axis == axis
            assert np.all(np.isin(signs.entries, (-1.0, 0.0, 1.0)))
            assert np.array_equal(signs.entries, -signs.entries.T)
            assert np.all(np.diag(signs.entries) == 0.0)

    def test_exact_zero_on_ties(self):
        config = RobotConfiguration([[0.5, 0.0], [0.5, 1.0], [0.2, 2.0]])
        signs = sign_matrix(config, 0)
        assert signs.entries[0, 1] == 0.0
        assert signs.entries[0, 2] == 1.0

    def test_axis_bounds(self):
        config = _tie_free_config(3, 2, 1)
        with pytest.raises(ValueError):
            sign_matrix(config, 2)
        with pytest.raises(ValueError):
            coordinate_difference_matrix(config, -1)

    def test_construction_validation(self):
        with pytest.raises(ValueError):
            SignMatrix(np.array([[0.0, 0.5], [-0.5, 0.0]]), 0)
        with pytest.raises(ValueError):
            SignMatrix(np.array([[0.0, 1.0], [1.0, 0.0]]), 0)
        with pytest.raises(ValueError):
            SignMatrix(np.zeros((2, 2)), -1)

    def test_difference_matrix_hand_value(self):
        config = RobotConfiguration([[1.0, 5.0], [4.0, 2.0]])
        diffs = coordinate_difference_matrix(config, 0)
        assert diffs[0, 1] == approx(-3.0)
        assert diffs[1, 0] == approx(3.0)
        assert np.array_equal(diffs, -diffs.T)


# == 3. ControlField =========================================================

class TestControlField:
    def test_shape_properties(self):
        field = ControlField(np.zeros((4, 2)))
        assert field.n == 4
        assert field.d == 2

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            ControlField(np.zeros(4))
        with pytest.raises(ValueError):
            ControlField(np.array([[np.nan, 0.0]]))


# == 4. Trace derivative =====================================================

class TestTraceDerivative:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    @pytest.mark.parametrize("k", [2, 3, 4, 5])
    def test_matches_finite_difference(self, seed, k):
        adjacency = build_adjacency(_tie_free_config(6, 2, seed), 1.0, 2)
        h = 1e-6
        for i, j in ((0, 1), (2, 5), (4, 3)):
            analytic = trace_derivative(adjacency, k, i, j)
            bumped = []
            for delta in (h, -h):
                w = adjacency.weights.copy()
                w[i, j] += delta
                w[j, i] += delta
                bumped.append(np.trace(np.linalg.matrix_power(w, k)))
            numeric = (bumped[0] - bumped[1]) / (2.0 * h)
            assert analytic == approx(numeric, rel=1e-6, abs=1e-8)

    def test_first_power_has_zero_derivative(self):
        adjacency = build_adjacency(_tie_free_config(4, 2, 3), 1.0, 2)
        assert trace_derivative(adjacency, 1, 0, 1) == 0.0

    def test_validation(self):
        adjacency = build_adjacency(_tie_free_config(4, 2, 3), 1.0, 2)
        with pytest.raises(ValueError):
            trace_derivative(adjacency, 0, 0, 1)
        with pytest.raises(ValueError):
            trace_derivative(adjacency, 2, 0, 4)
        with pytest.raises(ValueError):
            trace_derivative(adjacency, 2, 1, 1)


# == 5. Moment gradients =====================================================

class TestMomentGradient:
    @pytest.mark.parametrize("metric", [1, 2])
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_matches_finite_difference(self, metric, seed):
        config = _tie_free_config(6, 2, seed)
        params = _params(metric=metric, order=4)
        for k in range(2, 5):
            def field(c, k=k):
                adjacency = build_adjacency(c, params.decay, params.metric)
                return spectral_moments(adjacency, params.order).moment(k)

            analytic = moment_gradient(config, params, k)
            numeric = finite_difference_gradient(field, config)
            assert _norm_close(analytic, numeric, 1e-6)

    def test_gradient_shape(self):
        config = _tie_free_config(5, 3, 7)
        grad = moment_gradient(config, _params(order=3), 2)
        assert grad.shape == (5, 3)

    def test_moment_index_bounds(self):
        config = _tie_free_config(5, 2, 7)
        params = _params(order=3)
        with pytest.raises(ValueError):
            moment_gradient(config, params, 1)
        with pytest.raises(ValueError):
            moment_gradient(config, params, 4)

    def test_order_above_robot_count(self):
        config = _tie_free_config(3, 2, 7)
        with pytest.raises(ValueError):
            moment_gradient(config, _params(order=4), 2)


# == 6. Cost and control law =================================================

class TestCost:
    def test_hand_formula_two_robots(self):
        config = RobotConfiguration([[0.0, 0.0], [1.0, 0.0]])
        params = _params(order=2)
        a = np.exp(-1.0)
        targets = TargetSpectrum([0.0, 0.5])
        resid = a * a - 0.5
        assert cost(config, targets, params) == approx(resid * resid / 8.0)

    def test_zero_at_exact_target(self):
        config = _tie_free_config(5, 2, 11)
        params = _params(order=4)
        targets = _targets_below(config, params, fraction=1.0)
        assert cost(config, targets, params) == 0.0

    @pytest.mark.parametrize("seed", [0, 1])
    def test_nonnegative(self, seed):
        config = _tie_free_config(6, 2, seed)
        params = _params(order=5)
        targets = _targets_below(config, params)
        assert cost(config, targets, params) >= 0.0

    def test_order_mismatch_rejected(self):
        config = _tie_free_config(5, 2, 11)
        with pytest.raises(ValueError):
            cost(config, TargetSpectrum([0.0, 0.5, 0.5]), _params(order=4))


class TestControlLaw:
    @pytest.mark.parametrize("metric", [1, 2])
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_is_negative_cost_gradient(self, metric, seed):
        config = _tie_free_config(6, 2, seed)
        params = _params(metric=metric, order=4)
        targets = _targets_below(config, params)
        field = control_law(config, targets, params)
        numeric = finite_difference_gradient(
            lambda c: cost(c, targets, params), config
        )
        assert _norm_close(field.velocities, -numeric, 1e-5)

    def test_matches_per_moment_assembly(self):
        config = _tie_free_config(6, 2, 5)
        params = _params(order=5)
        targets = _targets_below(config, params)
        adjacency = build_adjacency(config, params.decay, params.metric)
        moments = spectral_moments(adjacency, params.order)
        assembled = np.zeros((config.n, config.d))
        for k in range(2, params.order + 1):
            resid = moments.moment(k) - targets.moments[k - 1]
            assembled += (resid / (2.0 * k)) * moment_gradient(config, params, k)
        field = control_law(config, targets, params)
        assert np.allclose(field.velocities, -assembled, rtol=1e-12, atol=1e-13)

    def test_zero_at_exact_target(self):
        config = _tie_free_config(5, 2, 13)
        params = _params(order=3)
        targets = _targets_below(config, params, fraction=1.0)
        field = control_law(config, targets, params)
        assert np.allclose(field.velocities, 0.0, atol=1e-15)


# == 7. Barrier and its gradient =============================================

class TestBarrier:
    def test_hand_formula(self):
        config = _tie_free_config(5, 2, 17)
        eps = (0.0, 1e-3, 2e-3, 0.0)
        params = _params(order=4, epsilons=eps)
        targets = _targets_below(config, params)
        adjacency = build_adjacency(config, params.decay, params.metric)
        moments = spectral_moments(adjacency, params.order).values
        expected = 0.0
        for k in (2, 3):
            margin = moments[k - 1] - targets.moments[k - 1]
            expected += eps[k - 1] / (4.0 * k * margin * margin)
        assert barrier(config, targets, params) == approx(expected, rel=1e-12)

    def test_zero_when_disabled(self):
        config = _tie_free_config(5, 2, 17)
        params = _params(order=3, barrier_enabled=False)
        # Targets above the current moments: infeasible, but the disabled
        # barrier never inspects margins.
        targets = TargetSpectrum([0.0, 100.0, 100.0])
        assert barrier(config, targets, params) == 0.0
        assert np.all(barrier_gradient(config, targets, params) == 0.0)

    def test_zero_when_all_constants_vanish(self):
        config = _tie_free_config(5, 2, 17)
        params = _params(order=3, epsilons=(0.0, 0.0, 0.0))
        targets = _targets_below(config, params)
        assert barrier(config, targets, params) == 0.0

    def test_raises_on_nonpositive_margin(self):
        config = _tie_free_config(5, 2, 19)
        params = _params(order=3)
        targets = TargetSpectrum([0.0, 100.0, 100.0])
        with pytest.raises(InfeasibleStateError):
            barrier(config, targets, params)
        with pytest.raises(InfeasibleStateError):
            barrier_gradient(config, targets, params)

    def test_grows_near_boundary(self):
        config = _tie_free_config(5, 2, 23)
        params = _params(order=2, epsilons=(0.0, 1e-6))
        adjacency = build_adjacency(config, params.decay, params.metric)
        m2 = spectral_moments(adjacency, 2).moment(2)
        near = barrier(config, TargetSpectrum([0.0, m2 - 1e-3]), params)
        far = barrier(config, TargetSpectrum([0.0, m2 - 1e-1]), params)
        assert near > far * 100.0


class TestBarrierGradient:
    @pytest.mark.parametrize("metric", [1, 2])
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_matches_finite_difference(self, metric, seed):
        config = _tie_free_config(6, 2, seed)
        # Large constants and wide margins keep the finite-difference
        # stencil well inside the smooth region.
        params = _params(metric=metric, order=4, epsilons=(0.0, 1e-3, 1e-3, 1e-3))
        targets = _targets_below(config, params, fraction=0.5)
        analytic = barrier_gradient(config, targets, params)
        numeric = finite_difference_gradient(
            lambda c: barrier(c, targets, params), config
        )
        assert _norm_close(analytic, numeric, 1e-5)

    def test_matches_per_moment_assembly(self):
        config = _tie_free_config(6, 2, 7)
        eps = (0.0, 1e-3, 0.0, 2e-3)
        params = _params(order=4, epsilons=eps)
        targets = _targets_below(config, params, fraction=0.5)
        adjacency = build_adjacency(config, params.decay, params.metric)
        moments = spectral_moments(adjacency, params.order)
        assembled = np.zeros((config.n, config.d))
        for k in range(2, params.order + 1):
            if eps[k - 1] == 0.0:
                continue
            margin = moments.moment(k) - targets.moments[k - 1]
            assembled += (
                -eps[k - 1] / (2.0 * k * margin**3)
            ) * moment_gradient(config, params, k)
        analytic = barrier_gradient(config, targets, params)
        assert np.allclose(analytic, assembled, rtol=1e-12, atol=1e-14)

    def test_pushes_margins_outward(self):
        # Moving against the barrier gradient must increase every guarded
        # margin's barrier term in aggregate: b decreases along -grad b.
        config = _tie_free_config(5, 2, 29)
        params = _params(order=3, epsilons=(0.0, 1e-4, 1e-4))
        targets = _targets_below(config, params, fraction=0.8)
        grad = barrier_gradient(config, targets, params)
        before = barrier(config, targets, params)
        nudged = RobotConfiguration(config.positions - 1e-6 * grad)
        after = barrier(nudged, targets, params)
        assert after < before


# == 8. Finite-difference oracle =============================================

class TestFiniteDifferenceGradient:
    def test_quadratic_field_exact(self):
        config = _tie_free_config(4, 2, 31)

        def field(c):
            return float(np.sum(c.positions**2))

        numeric = finite_difference_gradient(field, config, step=1e-5)
        assert np.allclose(numeric, 2.0 * config.positions, rtol=0.0, atol=1e-8)

    def test_second_order_convergence(self):
        config = _tie_free_config(3, 1, 37)

        def field(c):
            return float(np.sum(np.sin(c.positions)))

        exact = np.cos(config.positions)
        err_wide = np.abs(
            finite_difference_gradient(field, config, step=1e-2) - exact
        ).max()
        err_tight = np.abs(
            finite_difference_gradient(field, config, step=1e-3) - exact
        ).max()
        # Central differences: error ~ step^2, so 10x tighter step is
        # about 100x more accurate.
        assert err_tight < err_wide / 50.0

    def test_step_validation(self):
        config = _tie_free_config(3, 2, 0)
        with pytest.raises(ValueError):
            finite_difference_gradient(lambda c: 0.0, config, step=0.0)
        with pytest.raises(ValueError):
            finite_difference_gradient(lambda c: 0.0, config, step=-1e-6)
