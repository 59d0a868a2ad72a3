"""Exception types for numerical failures."""


class NumericalFailure(ArithmeticError):
    """Base class for failures of the time integration.

    ``t`` is filled in by :func:`qsdw.integrator.integrate` with the time of
    the step that failed.
    """

    t = None

    def __str__(self):
        msg = super().__str__()
        return msg if self.t is None else f"{msg} (at t={self.t:.6g})"


class ConvergenceError(NumericalFailure):
    """Fixed-point iteration of an implicit step did not converge."""

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class NonFiniteError(NumericalFailure):
    """A pointwise nonlinearity produced inf or nan."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index
