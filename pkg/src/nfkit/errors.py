"""Exception hierarchy shared by all solvers and analysis routines."""


class NfkitError(Exception):
    """Base class for all toolkit errors."""


class DomainError(NfkitError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class ConfigurationError(NfkitError, ValueError):
    """A model, grid or experiment configuration is inconsistent."""


class DivergenceError(NfkitError, RuntimeError):
    """A trajectory produced NaN/Inf. Carries the time of failure."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class SolverIntegrityError(NfkitError, RuntimeError):
    """An invariant the solver must preserve (e.g. variance positivity) broke."""


class NonConvergenceError(NfkitError, RuntimeError):
    """An iterative numerical routine failed to converge. Carries diagnostics."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class CertificationError(NfkitError, RuntimeError):
    """A residual certificate on an emitted spectral quantity failed."""
