"""Finite Markov decision processes and discounted-reward solvers.

States are integers ``0..n_states-1`` and actions integers
``0..n_actions-1``. Not every action is available in every state; the
availability mask decides which kernel rows and rewards are meaningful.

Policies are integer arrays of shape ``(n_states,)`` and value functions
float arrays of the same shape.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_discount, check_positive_int, check_stochastic_rows
from .exceptions import ConvergenceError, ValidationError

__all__ = [
    "MdpModel",
    "check_policy",
    "expected_reward",
    "q_values",
    "greedy_policy",
    "bellman_backup",
    "bellman_residual",
    "value_iteration",
    "policy_evaluation",
    "policy_iteration",
    "ValueIteration",
    "PolicyIteration",
]

# Q-values closer than TIE_ATOL + TIE_RTOL * |q| count as tied. The lowest
# action index wins a tie, which keeps the two solvers in agreement.
TIE_ATOL = 1e-9
TIE_RTOL = 1e-12
DIRECT_SOLVE_MAX_STATES = 10_000


def _readonly(array, dtype):
    array = np.array(array, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class MdpModel:
    """A finite MDP with per-transition rewards.

    Attributes
    ----------
    kernel : ndarray of shape (n_actions, n_states, n_states)
        ``kernel[a, s, t]`` is the probability of reaching ``t`` from ``s``
        under action ``a``. Rows of unavailable actions are ignored.
    reward : ndarray of shape (n_actions, n_states, n_states)
        ``reward[a, s, t]`` is collected on the transition ``s -> t``.
    available : ndarray of bool, shape (n_states, n_actions)
        ``available[s, a]`` is True when ``a`` may be chosen in ``s``.
    energy : ndarray of shape (n_states, n_actions), optional
        Energy drawn by each state-action pair. Needed only for demand
        analysis. Defaults to zeros.
    action_names : tuple of str, optional
    state_labels : ndarray of int, shape (n_states, 2), optional
        ``(machine_state, price_level)`` for each state.
    """

    kernel: np.ndarray
    reward: np.ndarray
    available: np.ndarray
    energy: np.ndarray = None
    action_names: tuple = None
    state_labels: np.ndarray = None

    def __post_init__(self):
        kernel = np.asarray(self.kernel, dtype=float)
        if kernel.ndim != 3 or kernel.shape[1] != kernel.shape[2]:
            raise ValidationError(f"kernel must have shape (A, S, S), got {kernel.shape}")
        n_actions, n_states, _ = kernel.shape
        reward = np.asarray(self.reward, dtype=float)
        if reward.shape != kernel.shape:
            raise ValidationError(f"reward shape {reward.shape} does not match kernel {kernel.shape}")
        available = np.asarray(self.available, dtype=bool)
        if available.shape != (n_states, n_actions):
            raise ValidationError(
                f"available must have shape {(n_states, n_actions)}, got {available.shape}"
            )
        if not available.any(axis=1).all():
            empty = np.flatnonzero(~available.any(axis=1))
            raise ValidationError(f"states {empty.tolist()} have no available action")
        for a in range(n_actions):
            check_stochastic_rows(kernel[a], f"kernel[{a}]", rows=available[:, a])
            if not np.all(np.isfinite(reward[a][available[:, a]])):
                raise ValidationError(f"reward[{a}] has non-finite entries on available rows")

        energy = np.zeros((n_states, n_actions)) if self.energy is None else self.energy
        energy = np.asarray(energy, dtype=float)
        if energy.shape != (n_states, n_actions):
            raise ValidationError(f"energy must have shape {(n_states, n_actions)}")
        names = self.action_names
        if names is None:
            names = tuple(f"a{i}" for i in range(n_actions))
        names = tuple(str(n) for n in names)
        if len(names) != n_actions:
            raise ValidationError("action_names length does not match the number of actions")
        labels = self.state_labels
        if labels is None:
            labels = np.column_stack([np.arange(n_states), np.zeros(n_states, dtype=int)])
        labels = np.asarray(labels, dtype=int)
        if labels.shape != (n_states, 2):
            raise ValidationError(f"state_labels must have shape {(n_states, 2)}")

        object.__setattr__(self, "kernel", _readonly(kernel, float))
        object.__setattr__(self, "reward", _readonly(np.where(np.isfinite(reward), reward, 0.0), float))
        object.__setattr__(self, "available", _readonly(available, bool))
        object.__setattr__(self, "energy", _readonly(energy, float))
        object.__setattr__(self, "action_names", names)
        object.__setattr__(self, "state_labels", _readonly(labels, int))

    @property
    def n_states(self):
        return self.kernel.shape[1]

    @property
    def n_actions(self):
        return self.kernel.shape[0]

    @cached_property
    def expected_rewards(self):
        """``r[s, a] = sum_t P_a(s, t) R_a(s, t)``; ``-inf`` where unavailable."""
        r = np.einsum("ast,ast->sa", self.kernel, self.reward)
        r[~self.available] = -np.inf
        r.setflags(write=False)
        return r

    def action_index(self, name):
        try:
            return self.action_names.index(name)
        except ValueError:
            raise ValidationError(
                f"unknown action {name!r}; model actions are {list(self.action_names)}"
            ) from None

    def __repr__(self):
        return f"MdpModel(n_states={self.n_states}, actions={list(self.action_names)})"


def check_policy(model, policy):
    """Return ``policy`` as a read-only int array valid for ``model``."""
    policy = np.asarray(policy)
    if policy.shape != (model.n_states,):
        raise ValidationError(f"policy must have shape ({model.n_states},), got {policy.shape}")
    if not np.issubdtype(policy.dtype, np.integer):
        raise ValidationError("policy entries must be integer action indices")
    if np.any(policy < 0) or np.any(policy >= model.n_actions):
        raise ValidationError("policy contains out-of-range action indices")
    bad = ~model.available[np.arange(model.n_states), policy]
    if bad.any():
        s = int(np.flatnonzero(bad)[0])
        raise ValidationError(
            f"policy chooses unavailable action {model.action_names[policy[s]]!r} in state {s}"
        )
    return _readonly(policy, np.intp)


def _check_values(model, v):
    v = np.asarray(v, dtype=float)
    if v.shape != (model.n_states,):
        raise ValidationError(f"value function must have shape ({model.n_states},)")
    if not np.all(np.isfinite(v)):
        raise ValidationError("value function must be finite")
    return v


def expected_reward(model, s, a):
    """Mean one-step reward of action ``a`` in state ``s``."""
    if not model.available[s, a]:
        raise ValidationError(f"action {a} is not available in state {s}")
    return float(model.kernel[a, s] @ model.reward[a, s])


def q_values(model, v, gamma):
    """State-action values ``r(s, a) + gamma * sum_t P_a(s, t) v(t)``.

    Unavailable pairs are ``-inf``.
    """
    q = model.expected_rewards + gamma * (model.kernel @ v).T
    q[~model.available] = -np.inf
    return q


def greedy_policy(q):
    """Row-wise argmax of ``q`` with near-ties going to the lowest index."""
    best = q.max(axis=1, keepdims=True)
    tied = q >= best - (TIE_ATOL + TIE_RTOL * np.abs(best))
    return np.argmax(tied, axis=1).astype(np.intp)


def bellman_backup(model, v, gamma):
    """One application of the optimality operator.

    Returns
    -------
    v_new : ndarray of shape (n_states,)
    policy : ndarray of int, shape (n_states,)
        Greedy action per state, lowest index on ties.
    """
    gamma = check_discount(gamma)
    q = q_values(model, _check_values(model, v), gamma)
    return q.max(axis=1), greedy_policy(q)


def bellman_residual(model, v, gamma):
    """Sup-norm distance between ``v`` and its Bellman backup."""
    v_new, _ = bellman_backup(model, v, gamma)
    return float(np.max(np.abs(v_new - np.asarray(v, dtype=float))))


def value_iteration(model, gamma=0.99, tol=1e-10, max_iter=1_000_000, return_n_iter=False):
    """Solve the discounted problem by value iteration.

    Iterates from ``v = 0`` and stops when the span (max minus min) of two
    successive iterates' difference is at most ``tol * (1 - gamma) / gamma``.
    The returned values are the usual midpoint extrapolation of the last
    iterate, which is within ``tol / 2`` of the optimum in sup norm.

    Iterates are kept normalised (shifted so the maximum is 0). A constant
    shift commutes with the backup up to a factor ``gamma``, so the policy
    and the span test are unchanged, while rounding error stays at the
    scale of the value spread rather than ``max|r| / (1 - gamma)``.

    Returns
    -------
    v : ndarray of shape (n_states,)
    policy : ndarray of int, shape (n_states,)
    n_iter : int
        Number of backups; only returned when ``return_n_iter`` is True.

    Raises
    ------
    ConvergenceError
        If the stopping rule is not met within ``max_iter`` backups.
    """
    gamma = check_discount(gamma)
    max_iter = check_positive_int(max_iter, "max_iter")
    threshold = tol * (1.0 - gamma) / gamma
    w = np.zeros(model.n_states)
    span = np.inf
    for n_iter in range(1, max_iter + 1):
        bw = q_values(model, w, gamma).max(axis=1)
        diff = bw - w
        lo, hi = diff.min(), diff.max()
        span = hi - lo
        if span <= threshold:
            v = bw + gamma / (1.0 - gamma) * 0.5 * (lo + hi)
            policy = greedy_policy(q_values(model, v, gamma))
            return (v, policy, n_iter) if return_n_iter else (v, policy)
        w = bw - bw.max()
    raise ConvergenceError("value iteration did not converge", span, max_iter)


def _policy_system(model, policy):
    states = np.arange(model.n_states)
    transition = model.kernel[policy, states]
    reward = model.expected_rewards[states, policy]
    return transition, reward


def policy_evaluation(model, policy, gamma=0.99, tol=1e-10, max_iter=1_000_000):
    """Discounted value of a fixed deterministic policy.

    Uses a dense linear solve up to 10**4 states and successive
    approximation beyond that.
    """
    gamma = check_discount(gamma)
    policy = check_policy(model, policy)
    transition, reward = _policy_system(model, policy)
    n = model.n_states
    if n <= DIRECT_SOLVE_MAX_STATES:
        return np.linalg.solve(np.eye(n) - gamma * transition, reward)
    v = np.zeros(n)
    for it in range(1, max_iter + 1):
        v_new = reward + gamma * (transition @ v)
        delta = np.max(np.abs(v_new - v))
        v = v_new
        if delta * gamma / (1.0 - gamma) <= tol:
            return v
    raise ConvergenceError("policy evaluation did not converge", delta, max_iter)


def policy_iteration(model, gamma=0.99, max_iter=None, return_n_iter=False):
    """Solve the discounted problem by Howard's policy iteration.

    Starts from the lowest-index available action in each state. An action
    is replaced only when another one is strictly better beyond the tie
    tolerance, so the loop cannot cycle; ``max_iter`` (default
    ``10 * n_states``) is a safety net.

    Returns
    -------
    v : ndarray of shape (n_states,)
    policy : ndarray of int, shape (n_states,)
    n_iter : int
        Number of evaluations; only returned when ``return_n_iter`` is True.
    """
    gamma = check_discount(gamma)
    if max_iter is None:
        max_iter = 10 * model.n_states
    max_iter = check_positive_int(max_iter, "max_iter")
    states = np.arange(model.n_states)
    policy = np.argmax(model.available, axis=1).astype(np.intp)
    for n_iter in range(1, max_iter + 1):
        v = policy_evaluation(model, policy, gamma)
        q = q_values(model, v, gamma)
        candidate = greedy_policy(q)
        current = q[states, policy]
        margin = TIE_ATOL + TIE_RTOL * np.abs(current)
        improve = q[states, candidate] > current + margin
        if not improve.any():
            final = candidate
            if not np.array_equal(final, policy):
                v = policy_evaluation(model, final, gamma)
            return (v, final, n_iter) if return_n_iter else (v, final)
        policy = np.where(improve, candidate, policy)
    residual = bellman_residual(model, v, gamma)
    raise ConvergenceError("policy iteration did not stabilise", residual, max_iter)


class _SolverBase(BaseEstimator):
    """Shared estimator surface: ``fit(model)`` then ``predict(states)``."""

    def _solve(self, model):
        raise NotImplementedError

    def fit(self, model, y=None):
        """Solve ``model`` and store ``value_``, ``policy_`` and ``n_iter_``."""
        if not isinstance(model, MdpModel):
            raise ValidationError(f"expected an MdpModel, got {type(model).__name__}")
        v, policy, n_iter = self._solve(model)
        self.value_ = v
        self.policy_ = policy
        self.n_iter_ = n_iter
        self.residual_ = bellman_residual(model, v, self.gamma)
        self.n_states_ = model.n_states
        return self

    def predict(self, states):
        """Action chosen by the fitted policy in each of ``states``."""
        check_is_fitted(self, "policy_")
        states = np.asarray(states, dtype=np.intp)
        if np.any(states < 0) or np.any(states >= self.n_states_):
            raise ValidationError("state index out of range")
        return self.policy_[states]

    def score(self, model, y=None):
        """Negative Bellman residual of the fitted values on ``model``."""
        check_is_fitted(self, "value_")
        return -bellman_residual(model, self.value_, self.gamma)


class ValueIteration(_SolverBase):
    """Value iteration as an estimator.

    Parameters
    ----------
    gamma : float, default=0.99
    tol : float, default=1e-10
    max_iter : int, default=1_000_000

    Attributes
    ----------
    value_ : ndarray of shape (n_states,)
    policy_ : ndarray of int, shape (n_states,)
    n_iter_ : int
    residual_ : float
        Bellman residual of ``value_``.
    """

    def __init__(self, gamma=0.99, tol=1e-10, max_iter=1_000_000):
        self.gamma = gamma
        self.tol = tol
        self.max_iter = max_iter

    def _solve(self, model):
        return value_iteration(model, self.gamma, self.tol, self.max_iter, return_n_iter=True)


class PolicyIteration(_SolverBase):
    """Policy iteration as an estimator. Same fitted attributes as
    :class:`ValueIteration`."""

    def __init__(self, gamma=0.99, max_iter=None):
        self.gamma = gamma
        self.max_iter = max_iter

    def _solve(self, model):
        return policy_iteration(model, self.gamma, self.max_iter, return_n_iter=True)
