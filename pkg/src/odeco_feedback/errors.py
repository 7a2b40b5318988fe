"""Exception types shared across the package."""

from __future__ import annotations

import math


class OdecoError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(OdecoError, ValueError):
    """A vector or tensor does not have the expected shape."""


class SpecError(OdecoError, ValueError):
    """A system description could not be parsed or is structurally malformed."""


class DomainError(OdecoError, ValueError):
    """A closed-form expression was evaluated outside its interval of validity.

    ``horizon`` is the end of the validity interval and ``mode`` (when set)
    is the 0-based index of the mode that escapes first.
    """

    def __init__(self, message: str, horizon: float = math.inf, mode: int | None = None):
        super().__init__(message)
        self.horizon = horizon
        self.mode = mode


class UnsupportedRegimeError(OdecoError, ValueError):
    """The requested certificate is not available for these parameters."""

    def __init__(self, message: str, mode: int | None = None):
        super().__init__(message)
        self.mode = mode


class PreconditionError(OdecoError, ValueError):
    """The initial condition does not meet the operation's precondition."""

    def __init__(self, message: str, mode: int | None = None):
        super().__init__(message)
        self.mode = mode


class InfeasibleDisturbanceError(OdecoError, ValueError):
    """A disturbance bound is at or above the largest tolerable level."""

    def __init__(self, message: str, modes: tuple[int, ...] = ()):
        super().__init__(message)
        self.modes = modes
