"""Exogenous electricity price process.

The price is a finite Markov chain over ordered levels. It is not affected
by device actions, so its stationary behaviour can be computed once and
reused for every device model built on top of it.
"""

from dataclasses import dataclass

import numpy as np

from ._markov import limit_distribution
from ._validation import (
    check_increasing,
    check_positive_int,
    check_probability,
    check_stochastic_matrix,
)
from .exceptions import ValidationError

__all__ = [
    "PriceChain",
    "build_birth_death_chain",
    "equidistant_levels",
    "stationary_distribution",
    "expected_price",
]


@dataclass(frozen=True, eq=False)
class PriceChain:
    """Price levels together with their transition matrix.

    Attributes
    ----------
    levels : ndarray of shape (n_levels,)
        Strictly increasing price values.
    transition : ndarray of shape (n_levels, n_levels)
        ``transition[i, j]`` is the probability of moving from level ``i``
        to level ``j`` in one interval.
    """

    levels: np.ndarray
    transition: np.ndarray

    def __post_init__(self):
        levels = check_increasing(self.levels)
        transition = check_stochastic_matrix(self.transition)
        if transition.shape[0] != levels.size:
            raise ValidationError(
                f"transition is {transition.shape[0]}x{transition.shape[0]} "
                f"but there are {levels.size} price levels"
            )
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "transition", transition)

    @property
    def n_levels(self):
        return self.levels.size

    def __repr__(self):
        return f"PriceChain(levels={self.levels.tolist()})"


def equidistant_levels(low, high, count):
    """``count`` evenly spaced prices from ``low`` to ``high`` inclusive."""
    count = check_positive_int(count, "count")
    if count == 1:
        return np.array([float(low)])
    if not high > low:
        raise ValidationError(f"high ({high}) must exceed low ({low})")
    return np.linspace(float(low), float(high), count)


def build_birth_death_chain(levels, p_up, p_down):
    """Nearest-neighbour random walk over price levels.

    From an interior level the price moves up one level with probability
    ``p_up``, down one level with ``p_down`` and otherwise stays. A move
    that would leave the range is folded into the stay probability.

    Examples
    --------
    >>> build_birth_death_chain([1.0, 2.0], 0.5, 0.5).transition
    array([[0.5, 0.5],
           [0.5, 0.5]])
    """
    levels = check_increasing(levels)
    p_up = check_probability(p_up, "p_up")
    p_down = check_probability(p_down, "p_down")
    if p_up + p_down > 1.0:
        raise ValidationError(f"p_up+p_down>1 ({p_up} + {p_down} = {p_up + p_down}); must be <= 1")
    n = levels.size
    transition = np.zeros((n, n))
    for i in range(n):
        if i + 1 < n:
            transition[i, i + 1] = p_up
        if i > 0:
            transition[i, i - 1] = p_down
        transition[i, i] = 1.0 - transition[i].sum()
    return PriceChain(levels, transition)


def stationary_distribution(chain, tol=1e-12, max_iter=1_000_000):
    """Stationary distribution of the price chain.

    Computed by averaged power iteration from the uniform distribution, so
    periodic and reducible chains return their long-run (Cesaro) limit.

    Raises
    ------
    ConvergenceError
        If ``||p - p T||_1 > tol`` after ``max_iter`` iterations.
    """
    n = chain.n_levels
    p, _ = limit_distribution(chain.transition, np.full(n, 1.0 / n), tol, max_iter)
    p.setflags(write=False)
    return p


def expected_price(chain, **kwargs):
    """Long-run mean price, ``sum_i pi_i * levels_i``."""
    return float(stationary_distribution(chain, **kwargs) @ chain.levels)
