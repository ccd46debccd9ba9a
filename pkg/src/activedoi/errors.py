"""Exception types raised by the solver stack."""


class ActiveDoiError(Exception):
    """Base class for all package errors."""


class ConfigError(ActiveDoiError, ValueError):
    """Invalid parameters or config-file contents."""

    def __init__(self, message, key=None, line=None):
        self.key = key
        self.line = line
        self.detail = message
        where = ""
        if key is not None:
            where += f"[{key}] "
        if line is not None:
            where += f"(line {line}) "
        super().__init__(where + message)


class SolverFailure(ActiveDoiError):
    """A linear solve stagnated or produced an unusable answer."""

    def __init__(self, message, iterations=None, residuals=None):
        self.iterations = iterations
        self.residuals = residuals
        super().__init__(message)


class NonConvergence(ActiveDoiError):
    """Picard iteration hit ``max_picard`` without meeting ``tol_fp``."""

    def __init__(self, message, history=(), step=None):
        self.history = list(history)
        self.step = step
        super().__init__(message)


class ConservationViolation(ActiveDoiError):
    """Total mass of the configuration field drifted beyond tolerance."""

    def __init__(self, message, drift=None, tol=None):
        self.drift = drift
        self.tol = tol
        super().__init__(message)
