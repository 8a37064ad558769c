from fractions import Fraction

import numpy as np
import pytest

from gridmdp.devices import build_device, default_spec
from gridmdp.mdp import MdpModel, value_iteration
from gridmdp.price import build_birth_death_chain, equidistant_levels

REFERENCE_LEVELS = [1.0, 1.25, 1.5, 1.75, 2.0]
REFERENCE_P_UP, REFERENCE_P_DOWN = 0.5, 0.3
# Thermostat energies and the discount at which the optimum is reproduced.
E_COOL, E_KEEP, E_HEAT = 0.1, 1.0, 2.1
N_T = 10
REFERENCE_GAMMA = 0.999


# ---------------------------------------------------------------------------
# Oracles. These deliberately avoid the package's own solvers and builders.
# ---------------------------------------------------------------------------

def birth_death_stationary_exact(n, p_up, p_down):
    """Exact stationary law of a birth-death chain from detailed balance."""
    ratio = Fraction(p_up).limit_denominator(10**6) / Fraction(p_down).limit_denominator(10**6)
    weights = [ratio**i for i in range(n)]
    total = sum(weights)
    return [w / total for w in weights]


def linear_solve_stationary(matrix):
    """Solve p (M - I) = 0 with sum(p) = 1 by least squares."""
    n = matrix.shape[0]
    a = np.vstack([matrix.T - np.eye(n), np.ones(n)])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    p, *_ = np.linalg.lstsq(a, b, rcond=None)
    return p


def thermostat_enumeration(policy_of, levels=REFERENCE_LEVELS, p_up=REFERENCE_P_UP, p_down=REFERENCE_P_DOWN,
                           n_t=N_T, energies=(E_COOL, E_KEEP, E_HEAT)):
    """Induced chain, per-state energy and reward of a thermostat policy.

    Built state by state from the textbook description: price moves up or
    down one level (boundary moves stay put), cool/keep/heat move the
    temperature by -1/0/+1, and the reward is -price * energy.

    ``policy_of(x, c)`` returns one of "cool", "keep", "heat".
    """
    n_p = len(levels)
    index = {}
    for x in range(n_t):
        for c in range(n_p):
            index[(x, c)] = len(index)
    step = {"cool": -1, "keep": 0, "heat": 1}
    energy_of = dict(zip(("cool", "keep", "heat"), energies))
    m = np.zeros((len(index), len(index)))
    energy = np.zeros(len(index))
    reward = np.zeros(len(index))
    for (x, c), s in index.items():
        a = policy_of(x, c)
        nx = x + step[a]
        assert 0 <= nx < n_t, "policy leaves the temperature range"
        moves = {c: 1.0}
        if c + 1 < n_p:
            moves[c + 1] = p_up
            moves[c] -= p_up
        if c - 1 >= 0:
            moves[c - 1] = p_down
            moves[c] -= p_down
        for nc, prob in moves.items():
            m[s, index[(nx, nc)]] += prob
        energy[s] = energy_of[a]
        reward[s] = -levels[c] * energy_of[a]
    return m, energy, reward


def random_mdp(rng, n_states, n_actions, dense=True):
    """Random MDP with every state having at least one available action."""
    available = rng.random((n_states, n_actions)) < 0.7
    available[np.arange(n_states), rng.integers(n_actions, size=n_states)] = True
    kernel = np.zeros((n_actions, n_states, n_states))
    for a in range(n_actions):
        for s in range(n_states):
            if dense:
                row = rng.dirichlet(np.ones(n_states))
            else:
                row = np.zeros(n_states)
                support = rng.choice(n_states, size=min(3, n_states), replace=False)
                row[support] = rng.dirichlet(np.ones(support.size))
            kernel[a, s] = row
    reward = rng.uniform(-1.0, 1.0, size=(n_actions, n_states, n_states))
    return MdpModel(kernel, reward, available)


# ---------------------------------------------------------------------------
# Fixtures
# ---------------------------------------------------------------------------

@pytest.fixture(scope="session")
def reference_chain():
    return build_birth_death_chain(equidistant_levels(1.0, 2.0, 5), REFERENCE_P_UP, REFERENCE_P_DOWN)


@pytest.fixture(scope="session")
def thermostat(reference_chain):
    return build_device(default_spec("control"), reference_chain)


@pytest.fixture(scope="session")
def thermostat_optimum(thermostat):
    return value_iteration(thermostat, REFERENCE_GAMMA, tol=1e-10)


@pytest.fixture(scope="session", params=["optional", "deferrable", "control", "storage"])
def device_model(request, reference_chain):
    return request.param, build_device(default_spec(request.param), reference_chain)


# ---------------------------------------------------------------------------
# Acceptance report: one line per criterion, shown at the end of the run.
# ---------------------------------------------------------------------------

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
