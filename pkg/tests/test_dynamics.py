"""
Unit tests for the closed-loop flow: feasibility, stepping, simulation.

Core claims:
    - SimulationSettings and TrajectoryRecord validate their inputs
    - feasibility_margin returns m_k - m_k* for k = 2..s with correct signs
    - ensure_feasible returns feasible starts unchanged, repairs infeasible
      ones by centroid compression, and rejects unrealizable targets
    - step accepts exactly the feasible, potential-nonincreasing candidates,
      halves dt on rejection, and stalls at the step-size floor
    - simulate terminates with the right reason (converged, horizon,
      stalled), keeps f + b nonincreasing and margins positive along the
      recorded trajectory, and is deterministic for identical scenarios
"""

import dataclasses

import numpy as np
import pytest
from pytest import approx

from momentflow.dynamics import (
    FlowStalled,
    SimulationSettings,
    TrajectoryRecord,
    TrajectorySample,
    UnrealizableTargetsError,
    ensure_feasible,
    feasibility_margin,
    simulate,
    step,
)
from momentflow.gradient import ControllerParams, barrier, cost
from momentflow.network import (
    RobotConfiguration,
    build_adjacency,
    spectral_moments,
)
from momentflow.scenarios import Scenario, TargetSpectrum, random_geometric_config


# -- Helpers -----------------------------------------------------------------

def _params(order=3, metric=2, **kwargs):
    return ControllerParams(decay=1.0, metric=metric, order=order, **kwargs)


def _reachable_scenario(seed=0, order=2, n=5, tol=1e-4):
    """Random start steering toward 80% of its own starting moments.

    Order 2 keeps the descent one-dimensional in moment space: with a
    single controlled moment there are no cross-moment boundary slides, so
    every run here converges in a few dozen steps.  The tests in this
    module probe bookkeeping, not endurance.
    """
    params = _params(order=order)
    shape = random_geometric_config(n, 2, seed)
    adjacency = build_adjacency(shape, params.decay, params.metric)
    targets = TargetSpectrum(0.8 * spectral_moments(adjacency, order).values)
    return Scenario(
        name="reachable",
        n=n,
        d=2,
        params=params,
        targets=targets,
        settings=SimulationSettings(cost_tolerance=tol),
        seed=seed,
    )


def _two_robot_state(gap=1.0, target=0.05):
    """One-dimensional pair with m_2 = exp(-2 gap) and an order-2 target."""
    config = RobotConfiguration([[0.0], [float(gap)]])
    params = ControllerParams(decay=1.0, metric=2, order=2)
    targets = TargetSpectrum([0.0, target])
    return config, targets, params


# == 1. Settings and record validation =======================================

class TestSimulationSettings:
    def test_defaults_are_consistent(self):
        settings = SimulationSettings()
        assert settings.min_step <= settings.dt
        assert settings.cost_tolerance > 0.0

    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            SimulationSettings(dt=0.0)
        with pytest.raises(ValueError):
            SimulationSettings(min_step=-1e-8)
        with pytest.raises(ValueError):
            SimulationSettings(dt=1e-9, min_step=1e-8)
        with pytest.raises(ValueError):
            SimulationSettings(max_time=0.0)
        with pytest.raises(ValueError):
            SimulationSettings(cost_tolerance=0.0)
        with pytest.raises(ValueError):
            SimulationSettings(record_every=0)


class TestTrajectoryRecord:
    def test_rejects_unknown_reason(self):
        config = RobotConfiguration([[0.0], [1.0]])
        adjacency = build_adjacency(config, 1.0, 2)
        moments = spectral_moments(adjacency, 2)
        sample = TrajectorySample(0.0, config, moments, 1.0, 0.0)
        with pytest.raises(ValueError):
            TrajectoryRecord(
                samples=(sample,),
                final_configuration=config,
                final_moments=moments,
                final_eigenvalues=np.array([0.3, -0.3]),
                termination_reason="wandered-off",
                accepted_steps=0,
                rejected_steps=0,
                simulated_time=0.0,
            )

    def test_rejects_empty_samples(self):
        config = RobotConfiguration([[0.0], [1.0]])
        adjacency = build_adjacency(config, 1.0, 2)
        moments = spectral_moments(adjacency, 2)
        with pytest.raises(ValueError):
            TrajectoryRecord(
                samples=(),
                final_configuration=config,
                final_moments=moments,
                final_eigenvalues=np.array([0.3, -0.3]),
                termination_reason="converged",
                accepted_steps=0,
                rejected_steps=0,
                simulated_time=0.0,
            )


# == 2. Feasibility margins ==================================================

class TestFeasibilityMargin:
    def test_hand_values(self):
        config, targets, params = _two_robot_state(gap=1.0, target=0.05)
        margins = feasibility_margin(config, targets, params)
        assert margins.shape == (1,)
        assert margins[0] == approx(np.exp(-2.0) - 0.05)

    def test_sign_flips_with_target(self):
        config, _, params = _two_robot_state()
        m2 = np.exp(-2.0)
        below = feasibility_margin(config, TargetSpectrum([0.0, m2 - 0.01]), params)
        above = feasibility_margin(config, TargetSpectrum([0.0, m2 + 0.01]), params)
        assert below[0] > 0.0
        assert above[0] < 0.0

    def test_order_mismatch_rejected(self):
        config, _, params = _two_robot_state()
        with pytest.raises(ValueError):
            feasibility_margin(config, TargetSpectrum([0.0, 0.1, 0.1]), params)


# == 3. ensure_feasible ======================================================

class TestEnsureFeasible:
    def test_feasible_start_unchanged(self):
        config, targets, params = _two_robot_state(gap=1.0, target=0.05)
        result = ensure_feasible(config, targets, params)
        assert result is config

    def test_compression_repairs_infeasible_start(self):
        # Spread team: moments near zero, target above them.
        config = RobotConfiguration([[0.0, 0.0], [8.0, 0.0], [0.0, 8.0], [8.0, 8.0]])
        params = _params(order=3)
        targets = TargetSpectrum([0.0, 1.2, 1.5])
        assert np.any(feasibility_margin(config, targets, params) <= 0.0)
        repaired = ensure_feasible(config, targets, params)
        margins = feasibility_margin(repaired, targets, params)
        assert np.all(margins > 0.0)
        # Compression moves robots toward the centroid, which is preserved.
        assert np.allclose(
            repaired.positions.mean(axis=0), config.positions.mean(axis=0)
        )

    def test_unrealizable_targets_rejected(self):
        config = RobotConfiguration([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        params = _params(order=2)
        # Ceiling for m_2 at n=3 is exactly 2.
        with pytest.raises(UnrealizableTargetsError):
            ensure_feasible(config, TargetSpectrum([0.0, 2.0]), params)

    def test_just_realizable_targets_accepted(self):
        config = RobotConfiguration([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        params = _params(order=2)
        repaired = ensure_feasible(config, TargetSpectrum([0.0, 1.9]), params)
        assert feasibility_margin(repaired, targets=TargetSpectrum([0.0, 1.9]), params=params)[0] > 0.0

    def test_rejects_negative_slack(self):
        config, targets, params = _two_robot_state()
        with pytest.raises(ValueError):
            ensure_feasible(config, targets, params, slack_fraction=-0.1)


# == 4. Single steps =========================================================

class TestStep:
    def test_descending_step_accepted(self):
        config, targets, params = _two_robot_state(gap=1.0, target=0.05)
        settings = SimulationSettings()
        potential_before = cost(config, targets, params) + barrier(config, targets, params)
        new_config, accepted, dt_next = step(config, targets, params, settings, settings.dt)
        assert accepted
        assert dt_next == settings.dt
        assert new_config is not config
        potential_after = cost(new_config, targets, params) + barrier(new_config, targets, params)
        assert potential_after <= potential_before
        assert np.all(feasibility_margin(new_config, targets, params) > 0.0)

    def test_overshooting_step_rejected_and_halved(self):
        # A giant step from a descending state flies past the target set.
        config, targets, params = _two_robot_state(gap=1.0, target=0.05)
        settings = SimulationSettings(dt=500.0, min_step=1e-8)
        new_config, accepted, dt_next = step(config, targets, params, settings, 500.0)
        assert not accepted
        assert new_config is config
        assert dt_next == approx(250.0)

    def test_stall_at_step_floor(self):
        config, targets, params = _two_robot_state(gap=1.0, target=0.05)
        settings = SimulationSettings(dt=500.0, min_step=500.0)
        with pytest.raises(FlowStalled):
            step(config, targets, params, settings, 500.0)

    def test_rejects_bad_dt(self):
        config, targets, params = _two_robot_state()
        settings = SimulationSettings()
        for dt in (0.0, -0.1, np.nan):
            with pytest.raises(ValueError):
                step(config, targets, params, settings, dt)


# == 5. Full simulation ======================================================

class TestSimulate:
    def test_converges_on_reachable_targets(self):
        record = simulate(_reachable_scenario(seed=1))
        assert record.termination_reason == "converged"
        assert record.samples[0].t == 0.0
        assert record.samples[-1].cost <= 1e-4
        assert record.accepted_steps > 0
        assert record.simulated_time > 0.0

    def test_final_state_matches_last_sample(self):
        record = simulate(_reachable_scenario(seed=2))
        last = record.samples[-1]
        assert last.configuration is record.final_configuration
        assert last.t == approx(record.simulated_time)
        adjacency = build_adjacency(
            record.final_configuration, 1.0, 2
        )
        assert np.allclose(
            spectral_moments(adjacency, 2).values, record.final_moments.values
        )

    def test_potential_monotone_and_margins_positive(self):
        scenario = _reachable_scenario(seed=3)
        scenario = dataclasses.replace(
            scenario, settings=SimulationSettings(cost_tolerance=1e-4, record_every=1)
        )
        record = simulate(scenario)
        potentials = [s.cost + s.barrier for s in record.samples]
        assert all(b <= a + 1e-15 for a, b in zip(potentials, potentials[1:]))
        for sample in record.samples:
            margins = feasibility_margin(
                sample.configuration, scenario.targets, scenario.params
            )
            assert np.all(margins > 0.0)

    def test_record_every_one_samples_every_accepted_step(self):
        scenario = _reachable_scenario(seed=4)
        scenario = dataclasses.replace(
            scenario, settings=SimulationSettings(cost_tolerance=1e-4, record_every=1)
        )
        record = simulate(scenario)
        assert len(record.samples) == record.accepted_steps + 1

    def test_horizon_when_time_runs_out(self):
        scenario = _reachable_scenario(seed=5)
        scenario = dataclasses.replace(
            scenario,
            settings=SimulationSettings(
                dt=0.05, max_time=0.1, cost_tolerance=1e-30
            ),
        )
        record = simulate(scenario)
        assert record.termination_reason == "horizon"
        assert record.simulated_time >= 0.1

    def test_stall_is_reported_not_raised(self):
        # dt pinned at a huge floor: the first trial step overshoots into
        # infeasibility and cannot shrink.
        config, targets, params = _two_robot_state(gap=1.0, target=0.05)
        scenario = Scenario(
            name="stall",
            n=2,
            d=1,
            params=params,
            targets=targets,
            settings=SimulationSettings(
                dt=500.0, min_step=500.0, cost_tolerance=1e-30
            ),
            initial_positions=config.positions,
        )
        record = simulate(scenario)
        assert record.termination_reason == "stalled"
        assert record.rejected_steps == 0
        assert record.accepted_steps == 0

    def test_unrealizable_targets_raise_before_integration(self):
        params = _params(order=2)
        scenario = Scenario(
            name="unrealizable",
            n=3,
            d=2,
            params=params,
            targets=TargetSpectrum([0.0, 2.5]),
            settings=SimulationSettings(),
            seed=0,
        )
        with pytest.raises(UnrealizableTargetsError):
            simulate(scenario)

    @pytest.mark.parametrize("seed", [0, 6])
    def test_deterministic_repeats(self, seed):
        first = simulate(_reachable_scenario(seed=seed))
        second = simulate(_reachable_scenario(seed=seed))
        assert np.array_equal(
            first.final_configuration.positions,
            second.final_configuration.positions,
        )
        assert first.accepted_steps == second.accepted_steps
        assert first.rejected_steps == second.rejected_steps
        assert first.simulated_time == second.simulated_time
        assert np.array_equal(
            first.final_moments.values, second.final_moments.values
        )

    def test_final_eigenvalues_read_only(self):
        record = simulate(_reachable_scenario(seed=7))
        with pytest.raises(ValueError):
            record.final_eigenvalues[0] = 0.0
