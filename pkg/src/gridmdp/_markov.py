"""Limiting distributions of finite Markov chains."""

import numpy as np

from .exceptions import ConvergenceError


def limit_distribution(matrix, initial, tol=1e-12, max_iter=1_000_000):
    """Long-run occupancy of a finite chain started from ``initial``.

    Iterates the lazy chain ``(I + M) / 2``. Its powers are binomially
    weighted averages of the powers of ``M`` and converge, from any start,
    to the same limit as the plain Cesaro average ``(1/n) sum_k p0 M^k``.
    Unlike the uniform average, the error decays geometrically, and
    periodic or reducible chains are handled without special cases.

    Parameters
    ----------
    matrix : ndarray of shape (n, n)
        Row-stochastic transition matrix.
    initial : ndarray of shape (n,)
        Starting distribution.
    tol : float
        Stop once ``||p - p M||_1 <= tol``.
    max_iter : int
        Iteration cap.

    Returns
    -------
    p : ndarray of shape (n,)
    n_iter : int
    """
    p = np.array(initial, dtype=float)
    residual = np.inf
    # Check the residual every few sweeps; it costs one extra product.
    check_every = 8
    for it in range(1, max_iter + 1):
        pm = p @ matrix
        if (it - 1) % check_every == 0:
            residual = np.abs(pm - p).sum()
            if residual <= tol:
                return p / p.sum(), it - 1
        p = 0.5 * (p + pm)
        p /= p.sum()
    residual = np.abs(p @ matrix - p).sum()
    if residual <= tol:
        return p, max_iter
    raise ConvergenceError("stationary distribution did not converge", residual, max_iter)
