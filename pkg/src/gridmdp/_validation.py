"""Input validation helpers shared across modules.

These follow the ``sklearn.utils.validation`` convention: each ``check_*``
function returns a cleaned (copied, read-only, correctly typed) value or
raises :class:`~gridmdp.exceptions.ValidationError`.
"""

import numbers

import numpy as np

from .exceptions import ValidationError

STOCHASTIC_ATOL = 1e-12
DISTRIBUTION_ATOL = 1e-10


def _frozen(array):
    array = np.array(array, dtype=float, copy=True)
    array.setflags(write=False)
    return array


def check_probability(value, name):
    """Return ``value`` as a float in [0, 1]."""
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise ValidationError(f"{name} must be a real number, got {value!r}")
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValidationError(f"{name} must lie in [0, 1], got {value}")
    return value


def check_discount(gamma):
    """Return ``gamma`` as a float in the open interval (0, 1)."""
    if isinstance(gamma, bool) or not isinstance(gamma, numbers.Real):
        raise ValidationError(f"gamma must be a real number, got {gamma!r}")
    gamma = float(gamma)
    if not 0.0 < gamma < 1.0:
        raise ValidationError(
            f"gamma must lie in (0, 1), got {gamma}; the undiscounted criterion is not supported"
        )
    return gamma


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ValidationError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValidationError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_increasing(levels, name="levels"):
    """Return a read-only 1-D float array that is non-empty and strictly increasing."""
    levels = np.asarray(levels, dtype=float)
    if levels.ndim != 1 or levels.size == 0:
        raise ValidationError(f"{name} must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(levels)):
        raise ValidationError(f"{name} must be finite")
    if np.any(np.diff(levels) <= 0):
        raise ValidationError(f"{name} must be strictly increasing, got {levels.tolist()}")
    return _frozen(levels)


def check_stochastic_rows(matrix, name="matrix", rows=None, atol=STOCHASTIC_ATOL):
    """Check that the selected rows of ``matrix`` are probability vectors.

    Parameters
    ----------
    matrix : array-like of shape (n, m)
    rows : array-like of bool of shape (n,), optional
        Mask of rows to check. All rows by default.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2:
        raise ValidationError(f"{name} must be 2-D, got shape {matrix.shape}")
    sub = matrix if rows is None else matrix[np.asarray(rows, dtype=bool)]
    if not np.all(np.isfinite(sub)):
        raise ValidationError(f"{name} contains non-finite entries")
    if np.any(sub < 0.0) or np.any(sub > 1.0):
        raise ValidationError(f"{name} has entries outside [0, 1]")
    err = np.abs(sub.sum(axis=1) - 1.0)
    if err.size and err.max() > atol:
        raise ValidationError(
            f"{name} rows must sum to 1 within {atol:g}, worst deviation {err.max():.3e}"
        )
    return matrix


def check_stochastic_matrix(matrix, name="transition"):
    """Return a read-only square row-stochastic matrix."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] == 0:
        raise ValidationError(f"{name} must be a non-empty square matrix, got shape {matrix.shape}")
    check_stochastic_rows(matrix, name)
    return _frozen(matrix)


def check_distribution(p, size=None, name="distribution", atol=DISTRIBUTION_ATOL):
    """Return ``p`` as a read-only probability vector."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1:
        raise ValidationError(f"{name} must be 1-D")
    if size is not None and p.size != size:
        raise ValidationError(f"{name} has length {p.size}, expected {size}")
    if not np.all(np.isfinite(p)) or np.any(p < 0.0):
        raise ValidationError(f"{name} entries must be finite and non-negative")
    if abs(p.sum() - 1.0) > atol:
        raise ValidationError(f"{name} must sum to 1 within {atol:g}, sums to {p.sum()!r}")
    return _frozen(p)
