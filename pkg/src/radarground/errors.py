"""Exception types shared across the package."""


class RadarGroundError(Exception):
    """Base class for all package-specific errors."""


class NotFoundError(RadarGroundError):
    """A required file or sample id is missing."""


class ParseError(RadarGroundError):
    """A file on disk is malformed; carries the offending line number when known."""

    def __init__(self, message: str, path=None, line: int | None = None):
        self.path = path
        self.line = line
        loc = ""
        if path is not None:
            loc = f" ({path}" + (f":{line}" if line is not None else "") + ")"
        super().__init__(message + loc)


class InvalidInput(RadarGroundError):
    """An argument violates a documented precondition."""


class InvalidPredicate(RadarGroundError):
    """A predicate's attribute, comparator, or operands are inconsistent."""


class GenerationRetryExhausted(RadarGroundError):
    """Scene generation could not produce a non-empty referent set."""


class ValidationError(RadarGroundError):
    """Cross-file or cross-object consistency check failed."""


class IncompatibleCheckpoint(RadarGroundError):
    """Checkpoint contents do not match the requested model configuration."""


class TrainingDiverged(RadarGroundError):
    """Loss became non-finite; carries the offending batch for diagnosis."""

    def __init__(self, message: str, batch_ids=None):
        self.batch_ids = list(batch_ids) if batch_ids is not None else []
        super().__init__(message)
