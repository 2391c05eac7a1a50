"""Exception types shared across the package."""

from __future__ import annotations


class EmratesError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(EmratesError, ValueError):
    """A precondition on user-supplied inputs was violated."""


class SingularSystem(EmratesError):
    """An M-step linear system stayed numerically singular after the jitter retry.

    Attributes
    ----------
    iteration : int or None
        EM iteration index at which the solve failed, when raised from a run.
    """

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message)
        self.iteration = iteration


class TooFewPoints(EmratesError):
    """A trajectory had fewer than 3 usable pre-plateau points for rate fitting."""


class OutOfRegime(EmratesError):
    """Closed-form bound requested outside its domain of validity.

    The message names the violated condition.
    """


class ConfigError(ValidationError):
    """An experiment/CLI configuration file failed schema validation."""
