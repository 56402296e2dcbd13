"""Exception types shared across driftwatch modules."""


class DriftwatchError(Exception):
    """Base class for all driftwatch errors."""


class InvalidInputError(DriftwatchError):
    """A value violates an operation's input contract (non-finite, empty, mismatched)."""


class ConfigError(DriftwatchError):
    """A configuration value is out of its allowed range or inconsistent."""


class SchemaError(DriftwatchError):
    """A record does not match the declared attribute schema.

    Carries the offending field name so rejections are actionable.
    """

    def __init__(self, field: str, message: str):
        super().__init__(message)
        self.field = field


class UndefinedScoreError(DriftwatchError):
    """A score's defining formula has a zero denominator."""


class TrainingError(DriftwatchError):
    """Model training failed to converge within its iteration cap."""


class AdaptationError(DriftwatchError):
    """Adaptation diverged; the input model is left untouched."""


class AnalysisRejectedError(DriftwatchError):
    """An analysis trigger was refused (already ran, or currently running)."""
