"""Exception hierarchy shared by all modules."""


class SlowvecError(Exception):
    """Base class for every error raised by the package."""

    def to_dict(self):
        out = {"error": type(self).__name__, "message": str(self)}
        for key, value in vars(self).items():
            if isinstance(value, (int, float, str, bool)) or value is None:
                out[key] = value
        return out


class InvalidDimensionError(SlowvecError, ValueError):
    pass


class InvalidSpectrumError(SlowvecError, ValueError):
    pass


class InvalidParameterError(SlowvecError, ValueError):
    pass


class DimensionMismatchError(SlowvecError, ValueError):
    pass


class PreconditionError(SlowvecError, ValueError):
    pass


class NotPowerBoundedError(SlowvecError):
    """Raised when an operator shows evidence of unbounded powers."""


class AmbiguousSplitError(SlowvecError):
    """An eigenvalue modulus falls inside the band around the spectral cut."""

    def __init__(self, message, gap):
        super().__init__(message)
        self.gap = gap


class NoSlowVectorsError(SlowvecError):
    """The stable subspace is the whole space, so nothing can be slow."""


class HorizonExhaustedError(SlowvecError):
    def __init__(self, message, k_cap, best_residual=None, best_min_norm=None):
        super().__init__(message)
        self.k_cap = k_cap
        self.best_residual = best_residual
        self.best_min_norm = best_min_norm


class InsufficientMultiplicityError(SlowvecError):
    def __init__(self, message, requested, available):
        super().__init__(message)
        self.requested = requested
        self.available = available


class SlowRefusal(SlowvecError):
    """A vector failed one of the two slow-vector inequalities.

    ``reason`` is ``"residual"`` or ``"orbit"``; for orbit failures
    ``failing_n`` is the first power at which the norm dropped.
    """

    def __init__(self, message, reason, value, failing_n=None):
        super().__init__(message)
        self.reason = reason
        self.value = value
        self.failing_n = failing_n


class ConvergenceError(SlowvecError):
    def __init__(self, message, last_gap):
        super().__init__(message)
        self.last_gap = last_gap


class StepExhaustedError(SlowvecError):
    """No power within the horizon met the greedy step bound."""

    def __init__(self, message, step, best_distance, target):
        super().__init__(message)
        self.step = step
        self.best_distance = best_distance
        self.target = target


class NumericalInstabilityError(SlowvecError):
    def __init__(self, message, cesaro=None, spectral=None, discrepancy=None):
        super().__init__(message)
        self.cesaro = cesaro
        self.spectral = spectral
        self.discrepancy = discrepancy


class NetCardinalityError(SlowvecError):
    def __init__(self, message, cap):
        super().__init__(message)
        self.cap = cap


class ScenarioError(SlowvecError):
    """A scenario file failed validation; ``field`` names the offending key."""

    def __init__(self, message, field=None, line=None):
        super().__init__(message)
        self.field = field
        self.line = line
