"""Exception types shared across the package."""


class ClasspulseError(Exception):
    """Base class for all package errors."""


class SessionParseError(ClasspulseError):
    """Raised for malformed session JSON; message carries the byte offset."""


class SchemaError(ClasspulseError):
    """Structural violation in parsed data; message names the frame/person locus."""


class OrderingError(ClasspulseError):
    """Frame timestamps are not strictly increasing."""


class RangeError(ClasspulseError):
    """A confidence or normalized coordinate lies outside [0, 1]."""


class LayoutError(ClasspulseError):
    """Invalid classroom layout (bad rect, missing required region)."""


class ConfigError(ClasspulseError):
    """Invalid configuration value."""


class DimensionError(ClasspulseError):
    """Non-positive or inconsistent grid/frame dimensions."""


class EmptySessionError(ClasspulseError):
    """A session with no analyzable content was handed to the pipeline."""


class OversizeError(ClasspulseError):
    """A stage payload cannot fit the token budget even at minimum frames."""


class BudgetExceededError(ClasspulseError):
    """An accelerator-memory acquisition would exceed the ledger budget."""


class RetentionViolation(ClasspulseError):
    """A session still references undeleted source frames."""

    def __init__(self, message: str, offending_indices: list[int]):
        super().__init__(message)
        self.offending_indices = offending_indices


class NotFoundError(ClasspulseError):
    """Unknown session, layout, or job identifier."""
