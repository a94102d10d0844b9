"""Exception and warning types raised by linflow."""


class LinflowError(Exception):
    """Base class for numerical failures inside linflow."""


class StiffnessError(LinflowError):
    """The adaptive integrator could not take a step larger than round-off."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class ObservableOverflow(LinflowError):
    """A lifted observable left the representable floating range.

    ``time`` is the first time at which the overflow threshold was hit and
    ``partial`` holds the trajectory computed up to that point.
    """

    def __init__(self, message, time, partial=None):
        super().__init__(message)
        self.time = time
        self.partial = partial


class KrylovConvergenceError(LinflowError):
    """Krylov exponential action did not reach tolerance within the step cap."""


class CFLViolation(LinflowError):
    """Explicit step too large for the monotone upwind update."""


class ConfigError(ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class RankDeficiencyWarning(UserWarning):
    """A least-squares problem was numerically rank deficient."""
