"""Exception hierarchy shared by every module."""

from __future__ import annotations


class EulerLabError(Exception):
    """Base class; the CLI maps any subclass to exit status 1."""


class GridError(EulerLabError, ValueError):
    pass


class NoConvergence(EulerLabError):
    def __init__(self, message: str, residual: float, iterations: int) -> None:
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class DegenerateLevel(EulerLabError):
    pass


class PointOnCurve(EulerLabError):
    pass


class NotSteady(EulerLabError):
    pass


class TooDegenerate(EulerLabError):
    pass


class NotRadial(EulerLabError):
    pass


class CflViolation(EulerLabError):
    pass


class Blowup(EulerLabError):
    pass


class StartAtStagnation(EulerLabError):
    pass


class NotClosed(EulerLabError):
    pass


class FitUnderresolved(EulerLabError):
    pass


class GradientDegenerate(EulerLabError):
    pass


class NotMonotoneRadial(EulerLabError):
    pass


class BranchUndetermined(EulerLabError):
    pass


class NotMonotoneCoupling(EulerLabError):
    pass


class TooLarge(EulerLabError):
    pass


class ConfigError(EulerLabError):
    """Raised for malformed configuration; the CLI maps it to exit status 2."""

    def __init__(self, message: str, line: int | None = None) -> None:
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UnknownKey(ConfigError):
    pass


class ConfigTypeError(ConfigError):
    pass


class RangeError(ConfigError):
    pass
