"""Long-run behaviour of a device operating under a fixed policy.

Given an :class:`~gridmdp.mdp.MdpModel` and a deterministic policy, this
module builds the induced Markov chain over ``(machine, price)`` states
and derives its stationary occupancy, the price-conditioned demand curve
and per-interval averages. A seeded Monte Carlo simulator is provided to
cross-check the analytic numbers.
"""

import warnings
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

from ._markov import limit_distribution
from ._validation import check_distribution, check_positive_int
from .exceptions import ValidationError
from .mdp import check_policy

__all__ = [
    "AnalysisReport",
    "SimulationResult",
    "induced_chain",
    "is_irreducible",
    "n_recurrent_classes",
    "joint_stationary",
    "demand_curve",
    "long_run_averages",
    "analyze",
    "simulate_trajectory",
]


def _grid_shape(model):
    labels = model.state_labels
    n_machine = int(labels[:, 0].max()) + 1
    n_levels = int(labels[:, 1].max()) + 1
    if n_machine * n_levels != model.n_states:
        raise ValidationError("state labels do not form a full machine x price grid")
    expected = np.array([(x, c) for x in range(n_machine) for c in range(n_levels)])
    if not np.array_equal(labels, expected):
        raise ValidationError("states must be ordered machine-major (x * n_levels + c)")
    return n_machine, n_levels


def induced_chain(model, policy):
    """Transition matrix ``M[s, t] = P_{policy[s]}(s, t)``."""
    policy = check_policy(model, policy)
    return model.kernel[policy, np.arange(model.n_states)]


def is_irreducible(matrix):
    """True if every state of the chain reaches every other state."""
    n, _ = connected_components(np.asarray(matrix) > 0, directed=True, connection="strong")
    return n == 1


def n_recurrent_classes(matrix):
    """Number of closed communicating classes of the chain.

    The stationary distribution is unique exactly when this is 1, even if
    some states are transient.
    """
    graph = np.asarray(matrix) > 0
    n, labels = connected_components(graph, directed=True, connection="strong")
    src, dst = np.nonzero(graph)
    leaks = np.zeros(n, dtype=bool)
    leaks[labels[src][labels[src] != labels[dst]]] = True
    return int(n - leaks.sum())


def joint_stationary(model, policy, initial=None, tol=1e-10, max_iter=1_000_000):
    """Long-run joint occupancy ``P_st(x, c)`` under ``policy``.

    Parameters
    ----------
    initial : array-like of shape (n_states,), optional
        Starting distribution, uniform by default. It only matters when the
        induced chain has more than one closed class; the result is then
        the long-run average reached from this start.
    tol : float
        Target ``||p - p M||_1``.

    Returns
    -------
    ndarray of shape (n_states,)
    """
    matrix = induced_chain(model, policy)
    n = model.n_states
    if initial is None:
        initial = np.full(n, 1.0 / n)
    initial = check_distribution(initial, n, "initial")
    p, _ = limit_distribution(matrix, initial, tol, max_iter)
    p.setflags(write=False)
    return p


def _policy_energy(model, policy):
    return model.energy[np.arange(model.n_states), policy]


def demand_curve(model, policy, stationary):
    """Expected energy drawn at each price level.

    ``<E|c> = sum_x E(pi(x, c)) P(x, c) / sum_x P(x, c)``. Levels with zero
    stationary mass get ``nan`` and trigger a ``RuntimeWarning``.

    Returns
    -------
    ndarray of shape (n_levels,)
    """
    policy = check_policy(model, policy)
    stationary = check_distribution(stationary, model.n_states, "stationary")
    n_machine, n_levels = _grid_shape(model)
    weight = stationary.reshape(n_machine, n_levels)
    energy = _policy_energy(model, policy).reshape(n_machine, n_levels)
    marginal = weight.sum(axis=0)
    curve = np.full(n_levels, np.nan)
    seen = marginal > 0
    curve[seen] = (energy * weight).sum(axis=0)[seen] / marginal[seen]
    if not seen.all():
        warnings.warn(
            f"demand undefined at price levels {np.flatnonzero(~seen).tolist()}: zero stationary mass",
            RuntimeWarning,
            stacklevel=2,
        )
    return curve


def long_run_averages(model, policy, stationary):
    """Per-interval average reward and energy under the stationary occupancy.

    Returns
    -------
    average_reward, average_consumption : float
    """
    policy = check_policy(model, policy)
    stationary = check_distribution(stationary, model.n_states, "stationary")
    states = np.arange(model.n_states)
    reward = model.expected_rewards[states, policy]
    return float(stationary @ reward), float(stationary @ _policy_energy(model, policy))


@dataclass(frozen=True, eq=False)
class AnalysisReport:
    """Everything derived from one (model, policy) pair.

    Attributes
    ----------
    joint_stationary : ndarray of shape (n_states,)
    demand_curve : ndarray of shape (n_levels,)
    price_marginal : ndarray of shape (n_levels,)
    machine_marginal : ndarray of shape (n_machine,)
    average_reward : float
    average_consumption : float
    reducible : bool
        Whether some state of the induced chain cannot reach another.
    recurrent_classes : int
        Number of closed classes. Above 1, the occupancy depends on the
        starting distribution.
    """

    joint_stationary: np.ndarray
    demand_curve: np.ndarray
    price_marginal: np.ndarray
    machine_marginal: np.ndarray
    average_reward: float
    average_consumption: float
    reducible: bool
    recurrent_classes: int

    @property
    def n_levels(self):
        return self.price_marginal.size

    @property
    def n_machine(self):
        return self.machine_marginal.size


def analyze(model, policy, initial=None, tol=1e-10, max_iter=1_000_000):
    """Build an :class:`AnalysisReport` for ``policy`` on ``model``."""
    policy = check_policy(model, policy)
    n_machine, n_levels = _grid_shape(model)
    p = joint_stationary(model, policy, initial, tol, max_iter)
    grid = p.reshape(n_machine, n_levels)
    avg_reward, avg_energy = long_run_averages(model, policy, p)
    matrix = induced_chain(model, policy)
    return AnalysisReport(
        joint_stationary=p,
        demand_curve=demand_curve(model, policy, p),
        price_marginal=grid.sum(axis=0),
        machine_marginal=grid.sum(axis=1),
        average_reward=avg_reward,
        average_consumption=avg_energy,
        reducible=not is_irreducible(matrix),
        recurrent_classes=n_recurrent_classes(matrix),
    )


@dataclass(frozen=True, eq=False)
class SimulationResult:
    """Empirical statistics of one simulated trajectory.

    ``states`` holds ``steps + 1`` visited states; occupancy and averages
    are taken over the ``steps`` decision epochs. Standard errors use
    non-overlapping batch means and are ``nan`` when there are fewer than
    two observations per batch.
    """

    states: np.ndarray
    occupancy: np.ndarray
    average_reward: float
    average_consumption: float
    reward_stderr: float
    consumption_stderr: float
    seed: int


def _batch_stderr(values, n_batches):
    size = values.size // n_batches
    if size < 2:
        return float("nan")
    means = values[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    return float(means.std(ddof=1) / np.sqrt(n_batches))


def simulate_trajectory(model, policy, steps, seed, initial_state=None, n_batches=50):
    """Sample a trajectory of the induced chain.

    Randomness comes from ``numpy.random.default_rng(seed)`` (PCG64), so
    the same model, policy, seed and start give an identical trajectory.
    With no ``initial_state`` the start is drawn uniformly from the same
    generator.
    """
    policy = check_policy(model, policy)
    steps = check_positive_int(steps, "steps")
    n_batches = check_positive_int(n_batches, "n_batches", minimum=2)
    matrix = induced_chain(model, policy)
    n = model.n_states
    rng = np.random.default_rng(seed)
    if initial_state is None:
        state = int(rng.integers(n))
    else:
        state = int(initial_state)
        if not 0 <= state < n:
            raise ValidationError(f"initial_state must be in [0, {n})")

    targets, cumulative = [], []
    for row in matrix:
        nz = np.flatnonzero(row)
        cum = np.cumsum(row[nz])
        cum[-1] = 1.0
        targets.append(nz.tolist())
        cumulative.append(cum.tolist())

    draws = rng.random(steps).tolist()
    states = np.empty(steps + 1, dtype=np.intp)
    states[0] = state
    for t, u in enumerate(draws, start=1):
        succ = targets[state]
        state = succ[bisect_right(cumulative[state], u)] if len(succ) > 1 else succ[0]
        states[t] = state

    here, there = states[:-1], states[1:]
    actions = policy[here]
    rewards = model.reward[actions, here, there]
    energy = model.energy[here, actions]
    states.setflags(write=False)
    return SimulationResult(
        states=states,
        occupancy=np.bincount(here, minlength=n) / steps,
        average_reward=float(rewards.mean()),
        average_consumption=float(energy.mean()),
        reward_stderr=_batch_stderr(rewards, n_batches),
        consumption_stderr=_batch_stderr(energy, n_batches),
        seed=int(seed),
    )
