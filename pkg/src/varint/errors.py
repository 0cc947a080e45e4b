"""Exception hierarchy shared by all modules."""


class VIError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameterError(VIError, ValueError):
    pass


class InvalidPairError(VIError, ValueError):
    """A discrete pair with t1 <= t0 or non-finite entries."""


class MissingForceError(VIError, ValueError):
    """A forced operation was applied to a conservative system."""


class UnsupportedRegimeError(VIError, ValueError):
    pass


class MissingOracleError(VIError, LookupError):
    """No reference solution is known for the system."""


class ConfigError(VIError, ValueError):
    pass


class SolverError(VIError, RuntimeError):
    """Base for Newton failures; carries the best iterate and its report."""

    def __init__(self, message, x=None, report=None):
        super().__init__(message)
        self.x = x
        self.report = report


class NonConvergenceError(SolverError):
    pass


class SingularSystemError(SolverError):
    pass


class GuardError(VIError, RuntimeError):
    """The adaptive step left its guard band; ``log`` holds the partial run."""

    def __init__(self, message, log=None, h=None):
        super().__init__(message)
        self.log = log
        self.h = h
