"""Exception types shared across the package."""


class ImpulseGameError(Exception):
    """Base class for all package errors."""


class ModelEvaluationError(ImpulseGameError):
    """A user-supplied model function returned a non-finite value.

    Carries the witness point at which the evaluation failed.
    """

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class BlowUpError(ImpulseGameError):
    """The integrated state became non-finite at some time."""

    def __init__(self, time):
        super().__init__(f"state blew up (non-finite) at t={time}")
        self.time = time


class GuardExceededError(ImpulseGameError):
    """A tractability guard on an enumeration was exceeded."""


class ConfigError(ImpulseGameError):
    """A run configuration is missing fields or malformed."""
