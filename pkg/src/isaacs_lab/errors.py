"""Exception hierarchy shared by all modules.

Configuration problems map to CLI exit status 2, numerical failures to 1.
"""

from __future__ import annotations


class IsaacsLabError(Exception):
    """Base class for every error raised by the package."""


class ConfigurationError(IsaacsLabError, ValueError):
    """A model, transport, or experiment description is invalid."""


class InputError(IsaacsLabError, ValueError):
    """An argument violates an operation's precondition."""


class NumericalError(IsaacsLabError, ArithmeticError):
    """Base class for failures of a numerical procedure."""


class BarrierNotFoundError(NumericalError):
    def __init__(self, message: str, margin: float, mu: float):
        super().__init__(message)
        self.margin = margin
        self.mu = mu


class MonotonicityError(NumericalError):
    """The discretization would not be monotone at some node."""

    def __init__(self, message: str, node: tuple):
        super().__init__(message)
        self.node = node


class NonConvergenceError(NumericalError):
    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class SingularOperatorError(NumericalError):
    """The discrete linear operator cannot be inverted."""


class SimulationError(NumericalError):
    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


class ConditionNotMetError(IsaacsLabError):
    """A structural precondition checked by a condition checker failed."""

    def __init__(self, message: str, report):
        super().__init__(message)
        self.report = report
