"""Shared exception types.

The CLI maps these onto exit codes: configuration problems exit with 2,
numeric failures with 3.
"""

from __future__ import annotations


class RowSumLabError(Exception):
    """Base class for all package errors."""


class ConfigurationError(RowSumLabError):
    """Invalid parameter, field, or config file content.

    ``field`` carries a dotted path (e.g. ``experiment.distribution.rate``)
    when the error originates from config parsing.
    """

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        self.message = message
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)

    def with_prefix(self, prefix: str) -> "ConfigurationError":
        """Same error relocated under a dotted config path."""
        field = f"{prefix}.{self.field}" if self.field else prefix
        return ConfigurationError(self.message, field=field)


class NumericError(RowSumLabError):
    """A numerical routine failed to reach its stated tolerance.

    ``achieved`` reports the error bound that was actually attained.
    """

    def __init__(self, message: str, achieved: float | None = None):
        self.achieved = achieved
        if achieved is not None:
            message = f"{message} (achieved error bound {achieved:.3e})"
        super().__init__(message)


class DomainError(RowSumLabError):
    """A function was evaluated outside its domain; carries the offending x."""

    def __init__(self, x: float, lo: float, hi: float):
        self.x = x
        super().__init__(f"x={x!r} outside domain ({lo!r}, {hi!r})")


class OutOfNeighborhoodError(RowSumLabError):
    """Taylor-remainder bound requested outside its validity neighborhood."""

    def __init__(self, x: float, center: float, radius: float):
        self.x = x
        super().__init__(
            f"|x - {center!r}| = {abs(x - center)!r} >= neighborhood radius {radius!r}"
        )


class SamplingOverflowError(RowSumLabError):
    """A discrete atom's value is not representable in double precision.

    Raised by the heavy-tailed lattice family when sampling mode would need an
    atom beyond float range; analytic mode remains available.
    """
