"""Exception types shared across the package.

Every error raised deliberately by this package derives from
:class:`PtDimerError`, so callers can catch one base class at API
boundaries (the command-line driver maps subclasses onto exit codes).
"""

from __future__ import annotations


class PtDimerError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(PtDimerError):
    """A parameter set violates one or more declared bounds.

    ``violations`` holds every offending ``(field, message)`` pair, not
    just the first, so a caller can report the full list at once.
    """

    def __init__(self, violations: list[tuple[str, str]]):
        self.violations = list(violations)
        detail = "; ".join(f"{field}: {msg}" for field, msg in self.violations)
        super().__init__(f"invalid parameters ({detail})")


class DomainError(PtDimerError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigError(PtDimerError):
    """A run configuration (integration or sweep grid) is inconsistent."""


class StepSizeError(PtDimerError):
    """The integrator state left the trusted range (blow-up guard)."""


class ConvergenceError(PtDimerError):
    """An iterative numerical routine failed to converge."""


class InsufficientDataError(PtDimerError):
    """A time series or envelope is too short for the requested analysis."""


class SingularityError(PtDimerError):
    """The integrand is singular on the requested evaluation grid."""


class BranchError(PtDimerError):
    """A complex-power branch choice is undefined for the given input."""


class NoTransitionError(PtDimerError):
    """A phase-map column contains a single label; nothing to refine."""
