"""Exception hierarchy shared by all modules.

Every error carries its class name to the CLI, which prints it on stderr and
maps it to an exit code.
"""

from __future__ import annotations


class FPTError(Exception):
    """Base class for all numerical/validation failures raised by the package."""


class ConfigError(FPTError, ValueError):
    """Malformed input (boundary spec, run configuration)."""


class NonPositiveGap(ConfigError):
    pass


class NonConvexBoundary(ConfigError):
    pass


class DegenerateBoundary(ConfigError):
    pass


class DomainError(FPTError, ValueError):
    """Argument outside the domain of a closed-form density."""


class OutOfTabulatedRange(DomainError):
    pass


class QuadratureFailure(FPTError, ArithmeticError):
    pass


class GridTooCoarse(FPTError):
    pass


class NonConvergence(FPTError, ArithmeticError):
    pass


class DeltaApproximationError(FPTError):
    pass


class NonPositiveField(FPTError, ValueError):
    pass
