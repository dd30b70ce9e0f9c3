"""Exception hierarchy shared by every module of the package."""


class TrackPGDError(Exception):
    """Base class for all package errors."""


class InvalidInputError(TrackPGDError, ValueError):
    """An argument violates a documented precondition (shape, range, finiteness)."""


class AttackError(TrackPGDError, RuntimeError):
    """The attack loop could not complete."""


class GradientError(AttackError):
    """A non-finite input gradient was produced."""


class TrainingError(TrackPGDError, RuntimeError):
    """Toy tracker training diverged."""


class IngestionError(TrackPGDError, OSError):
    """A dataset directory or image file could not be read."""


class ConfigError(TrackPGDError, ValueError):
    """A configuration file or CLI override is invalid."""
