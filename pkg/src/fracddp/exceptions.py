"""Exception hierarchy shared by the numerical modules and the CLI."""


class FracDDPError(Exception):
    """Base class for all package errors."""


class ConfigError(FracDDPError, ValueError):
    """Invalid configuration value or unknown key (CLI exit code 2)."""

    def __init__(self, message, key=None):
        super().__init__(message if key is None else f"{key}: {message}")
        self.key = key


class NumericalAbort(FracDDPError, RuntimeError):
    """A run was stopped because the discrete state became untrustworthy (exit code 3)."""

    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"step {step}: {message}")
        self.step = step


class PositivityLoss(NumericalAbort):
    pass


class NonFiniteState(NumericalAbort):
    pass


class CFLViolation(NumericalAbort):
    pass


class QuadratureError(FracDDPError, RuntimeError):
    """Adaptive quadrature did not reach the requested accuracy."""
