"""Exception hierarchy.

Every error maps onto one of three CLI exit codes: configuration problems
(1), numerical failures (2) and admissible-class violations (3).
"""

from __future__ import annotations


class ResolabError(Exception):
    """Base class for all package errors."""

    exit_code = 2


class ConfigError(ResolabError):
    """Invalid input file, flag or parameter."""

    exit_code = 1


class NumericError(ResolabError):
    """A numerical stage failed (integration, quadrature, root finding)."""

    exit_code = 2


class ClassViolationError(ResolabError):
    """Input lies outside the admissible class B_delta(Q)."""

    exit_code = 3


class IntegrationError(NumericError):
    """ODE step size underflowed."""

    def __init__(self, message: str, x: float):
        super().__init__(f"{message} (x={x:.6g})")
        self.x = x


class OverflowGuardError(NumericError):
    """|Im z| exceeds the overflow guard of the Jost solver."""


class NearSingularError(NumericError):
    """|w(z)| too small to form the scattering matrix."""


class DivergenceError(NumericError):
    """Fixed-point iteration did not converge."""


class ContourTooCloseError(NumericError):
    """A zero of f lies too close to the counting contour."""


class ZeroMatchError(NumericError):
    """Two zero sets could not be matched (count mismatch or distance)."""


class UnsupportedOrderError(NumericError):
    """Zero of s at the origin; higher order normalisation not supported."""


class FitError(NumericError):
    """Least-squares normalisation of a Hadamard model is ill conditioned."""


class OutOfValidityError(NumericError):
    """Argument outside the range where a bound is valid."""


class RefinementError(NumericError):
    """Quadrature refinement disagreed beyond tolerance."""

    def __init__(self, message: str, region: str):
        super().__init__(f"{message} (region {region})")
        self.region = region


class NearOriginError(NumericError):
    """Argument too close to z = 0 for a formula with a 1/z factor."""


class ModelInconsistencyError(NumericError):
    """Reconstructed data contradict an exact identity."""


class HalfBoundStateError(ClassViolationError):
    """w vanishes at the origin."""


class PreconditionError(ClassViolationError):
    """Zero data do not satisfy a pipeline precondition."""


class StageError(ResolabError):
    """Wraps an upstream error with the pipeline stage that raised it."""

    def __init__(self, stage: str, cause: ResolabError):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = cause.exit_code
