"""Exception types shared across the simulator."""

from __future__ import annotations


class DomainError(ValueError):
    """An argument lies outside the range an operation is defined on."""


class QuadratureError(ArithmeticError):
    """Composite quadrature failed to reach the requested tolerance.

    ``achieved`` holds the last relative error estimate.
    """

    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved relative error {achieved:.3e})")
        self.achieved = achieved


class DegeneratePoint(ValueError):
    """Both slit amplitudes (nearly) vanish, so the conditional state is undefined."""


class DegenerateWindow(ValueError):
    """A detector window collects (numerically) no probability."""
