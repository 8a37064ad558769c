"""Exception types raised by gridmdp."""


class GridMDPError(Exception):
    """Base class for all gridmdp errors."""


class ValidationError(GridMDPError, ValueError):
    """An input violates a documented precondition or invariant."""


class ConvergenceError(GridMDPError, RuntimeError):
    """An iterative routine hit its iteration cap before reaching tolerance.

    Parameters
    ----------
    message : str
        Human readable description.
    residual : float
        Last residual observed before giving up.
    n_iter : int
        Number of iterations performed.
    """

    def __init__(self, message, residual, n_iter):
        super().__init__(f"{message} (residual={residual:.3e} after {n_iter} iterations)")
        self.residual = float(residual)
        self.n_iter = int(n_iter)
