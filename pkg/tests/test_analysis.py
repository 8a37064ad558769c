import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridmdp.analysis import (
    analyze,
    demand_curve,
    induced_chain,
    is_irreducible,
    joint_stationary,
    long_run_averages,
    n_recurrent_classes,
    simulate_trajectory,
)
from gridmdp.devices import build_device, default_spec
from gridmdp.exceptions import ValidationError
from gridmdp.mdp import MdpModel
from gridmdp.price import build_birth_death_chain, expected_price, stationary_distribution

from conftest import linear_solve_stationary, thermostat_enumeration

N_P = 5


def keep_policy(model):
    return np.full(model.n_states, model.action_index("keep"))


def random_policy(model, rng):
    return np.array([rng.choice(np.flatnonzero(row)) for row in model.available])


def single_state(energy=1.0, reward=-1.0):
    return MdpModel(np.ones((1, 1, 1)), np.full((1, 1, 1), reward), [[True]], energy=[[energy]])


class TestInducedChain:
    def test_single_action_model(self):
        rng = np.random.default_rng(0)
        kernel = rng.dirichlet(np.ones(4), size=4)[None]
        model = MdpModel(kernel, np.zeros_like(kernel), np.ones((4, 1), dtype=bool))
        np.testing.assert_array_equal(induced_chain(model, np.zeros(4, dtype=int)), kernel[0])

    def test_keep_freezes_temperature(self, thermostat, reference_chain):
        m = induced_chain(thermostat, keep_policy(thermostat))
        np.testing.assert_array_equal(m, np.kron(np.eye(10), reference_chain.transition))
        assert not is_irreducible(m)
        assert n_recurrent_classes(m) == 10

    def test_optimal_chain_has_single_recurrent_class(self, thermostat, thermostat_optimum):
        m = induced_chain(thermostat, thermostat_optimum[1])
        # A handful of states are transient, e.g. the coldest level at the
        # cheapest price, but there is exactly one closed class.
        assert n_recurrent_classes(m) == 1

    def test_rejects_invalid_policy(self, thermostat):
        with pytest.raises(ValidationError):
            induced_chain(thermostat, np.zeros(thermostat.n_states, dtype=int))


class TestJointStationary:
    def test_keep_from_fixed_temperature(self, thermostat, reference_chain):
        price = stationary_distribution(reference_chain)
        initial = np.zeros((10, N_P))
        initial[5] = price
        p = joint_stationary(thermostat, keep_policy(thermostat), initial.ravel())
        expected = np.zeros((10, N_P))
        expected[5] = price
        np.testing.assert_allclose(p, expected.ravel(), atol=1e-10)

    def test_optimal_skews_to_low_temperature(self, thermostat, thermostat_optimum):
        p = joint_stationary(thermostat, thermostat_optimum[1]).reshape(10, N_P)
        machine = p.sum(axis=1)
        assert machine.argmax() == 0
        assert machine[0] > 0.3
        assert machine[:5].sum() > machine[5:].sum()

    def test_matches_linear_solve(self, thermostat, thermostat_optimum):
        policy = thermostat_optimum[1]
        p = joint_stationary(thermostat, policy)
        m = induced_chain(thermostat, policy)
        np.testing.assert_allclose(p, linear_solve_stationary(m), atol=1e-9)
        assert np.abs(p - p @ m).sum() <= 1e-9

    def test_independent_of_start_for_unichain(self, thermostat, thermostat_optimum):
        initial = np.zeros(thermostat.n_states)
        initial[-1] = 1.0
        a = joint_stationary(thermostat, thermostat_optimum[1])
        b = joint_stationary(thermostat, thermostat_optimum[1], initial)
        np.testing.assert_allclose(a, b, atol=1e-9)


class TestDemandCurve:
    def test_constant_energy_single_machine_state(self, reference_chain):
        # One machine state, one action, energy 0.7 everywhere.
        kernel = reference_chain.transition[None]
        model = MdpModel(kernel, np.zeros_like(kernel), np.ones((N_P, 1), dtype=bool),
                         energy=np.full((N_P, 1), 0.7),
                         state_labels=np.column_stack([np.zeros(N_P, dtype=int), np.arange(N_P)]))
        p = stationary_distribution(reference_chain)
        np.testing.assert_allclose(demand_curve(model, np.zeros(N_P, dtype=int), p), 0.7)

    def test_keep_demand_is_flat(self, thermostat):
        policy = keep_policy(thermostat)
        p = joint_stationary(thermostat, policy)
        np.testing.assert_allclose(demand_curve(thermostat, policy, p), 1.0, atol=1e-12)

    def test_zero_mass_level_is_undefined(self, thermostat):
        policy = keep_policy(thermostat)
        p = np.zeros((10, N_P))
        p[:, :4] = 1.0 / 40
        with pytest.warns(RuntimeWarning, match="undefined"):
            curve = demand_curve(thermostat, policy, p.ravel())
        assert np.isnan(curve[4])
        np.testing.assert_allclose(curve[:4], 1.0)

    def test_matches_enumeration(self, thermostat, thermostat_optimum):
        policy = thermostat_optimum[1]
        names = thermostat.action_names
        m, energy, _ = thermostat_enumeration(lambda x, c: names[policy[x * N_P + c]])
        p = linear_solve_stationary(m).reshape(10, N_P)
        oracle = (energy.reshape(10, N_P) * p).sum(axis=0) / p.sum(axis=0)
        ours = demand_curve(thermostat, policy, joint_stationary(thermostat, policy))
        np.testing.assert_allclose(ours, oracle, atol=1e-9)


class TestAverages:
    def test_keep_closed_form(self, thermostat, reference_chain):
        policy = keep_policy(thermostat)
        reward, energy = long_run_averages(thermostat, policy, joint_stationary(thermostat, policy))
        assert reward == pytest.approx(-1.0 * expected_price(reference_chain), abs=1e-9)
        assert energy == pytest.approx(1.0, abs=1e-12)

    def test_zero_reward_model(self):
        reward, energy = long_run_averages(single_state(energy=0.4, reward=0.0), np.array([0]), np.array([1.0]))
        assert reward == 0.0 and energy == pytest.approx(0.4)

    def test_report(self, thermostat, thermostat_optimum, reference_chain):
        report = analyze(thermostat, thermostat_optimum[1])
        np.testing.assert_allclose(report.price_marginal, stationary_distribution(reference_chain), atol=1e-9)
        assert report.price_marginal @ report.demand_curve == pytest.approx(report.average_consumption, abs=1e-9)
        assert 0.1 <= report.demand_curve.min() and report.demand_curve.max() <= 2.1
        assert report.n_levels == N_P and report.n_machine == 10
        assert report.recurrent_classes == 1


class TestSimulation:
    def test_single_state(self):
        sim = simulate_trajectory(single_state(), np.array([0]), 100, seed=3)
        assert sim.occupancy.tolist() == [1.0]
        assert sim.average_reward == -1.0
        assert sim.states.size == 101

    def test_deterministic(self, thermostat, thermostat_optimum):
        a = simulate_trajectory(thermostat, thermostat_optimum[1], 5000, seed=42)
        b = simulate_trajectory(thermostat, thermostat_optimum[1], 5000, seed=42)
        c = simulate_trajectory(thermostat, thermostat_optimum[1], 5000, seed=43)
        np.testing.assert_array_equal(a.states, b.states)
        assert a.average_reward == b.average_reward
        assert not np.array_equal(a.states, c.states)

    def test_starts_where_asked(self, thermostat, thermostat_optimum):
        sim = simulate_trajectory(thermostat, thermostat_optimum[1], 10, seed=0, initial_state=7)
        assert sim.states[0] == 7
        with pytest.raises(ValidationError):
            simulate_trajectory(thermostat, thermostat_optimum[1], 10, seed=0, initial_state=50)

    def test_keep_never_changes_temperature(self, thermostat):
        sim = simulate_trajectory(thermostat, keep_policy(thermostat), 2000, seed=1)
        assert len(set((sim.states // N_P).tolist())) == 1
        assert sim.average_consumption == 1.0

    def test_realised_rewards_match_enumeration(self, thermostat, thermostat_optimum):
        policy = thermostat_optimum[1]
        names = thermostat.action_names
        _, energy, reward = thermostat_enumeration(lambda x, c: names[policy[x * N_P + c]])
        sim = simulate_trajectory(thermostat, policy, 3000, seed=9)
        visited = sim.states[:-1]
        assert sim.average_reward == pytest.approx(reward[visited].mean(), abs=1e-12)
        assert sim.average_consumption == pytest.approx(energy[visited].mean(), abs=1e-12)

    def test_stderr_needs_enough_steps(self):
        sim = simulate_trajectory(single_state(), np.array([0]), 10, seed=0, n_batches=50)
        assert np.isnan(sim.reward_stderr)


@pytest.mark.parametrize("kind", ["optional", "deferrable", "control", "storage"])
@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_price_marginal_invariance_and_consistency(kind, seed):
    chain = build_birth_death_chain([1.0, 1.25, 1.5, 1.75, 2.0], 0.5, 0.3)
    model = build_device(default_spec(kind), chain)
    policy = random_policy(model, np.random.default_rng(seed))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        report = analyze(model, policy)
    np.testing.assert_allclose(report.price_marginal, stationary_distribution(chain), atol=1e-9)
    m = induced_chain(model, policy)
    assert np.abs(report.joint_stationary - report.joint_stationary @ m).sum() <= 1e-9
    seen = ~np.isnan(report.demand_curve)
    total = (report.price_marginal[seen] * report.demand_curve[seen]).sum()
    assert total == pytest.approx(report.average_consumption, abs=1e-9)
