"""
maskwatch Exception Hierarchy

Custom exceptions for the maskwatch library so that numerical, data-format,
registry and notification failures can be told apart by callers (and mapped
to distinct exit codes by the CLI).
"""


class MaskwatchError(Exception):
    """
    Base exception for all maskwatch errors.

    This is the root exception that all other library exceptions inherit from,
    allowing users to catch every maskwatch failure with a single except block.
    """

    def __init__(self, message: str, cause: Exception | None = None) -> None:
        """
        Initialize the base error.

        Args:
            message: Human-readable error description
            cause: Original exception that caused this error (if any)
        """
        super().__init__(message)
        self.message = message
        self.cause = cause

    def __str__(self) -> str:
        """Return string representation of the error."""
        if self.cause:
            return f"{self.message} (caused by: {self.cause})"
        return self.message


class ValidationError(MaskwatchError):
    """
    Invalid input values.

    Raised when an operation's preconditions are violated by the values passed
    in (wrong dimensions, zero vectors, empty batches, malformed addresses).
    """


class DimensionMismatch(ValidationError):
    """Vector or matrix dimensions do not agree."""

    def __init__(
        self,
        message: str = "Dimension mismatch",
        expected: int | None = None,
        actual: int | None = None,
        cause: Exception | None = None,
    ) -> None:
        """
        Initialize dimension error.

        Args:
            message: Error description
            expected: Dimension the operation required
            actual: Dimension that was supplied
            cause: Original exception that caused this error
        """
        super().__init__(message, cause)
        self.expected = expected
        self.actual = actual


class InvalidLabel(ValidationError):
    """Class index outside ``[0, C)``."""

    def __init__(self, label: int, num_classes: int) -> None:
        super().__init__(f"Label {label} out of range for {num_classes} classes")
        self.label = label
        self.num_classes = num_classes


class ZeroVector(ValidationError):
    """A vector that must be normalized has zero length."""


class ZeroEmbedding(ZeroVector):
    """The network produced an all-zero pre-normalization output."""


class EmptyBatch(ValidationError):
    """An aggregate was requested over zero samples."""


class EmptyIntersection(ValidationError):
    """A box lies entirely outside the frame it is clamped to."""


class DegenerateLandmarks(ValidationError):
    """Landmark distances collapse so the pose ratio is undefined."""


class InvalidAddress(ValidationError):
    """An alert address is empty or does not contain exactly one '@'."""


class NonPositiveTime(ValidationError):
    """A baseline timing value is zero or negative."""

    def __init__(self, stage: str, value: float) -> None:
        super().__init__(f"Baseline time for {stage!r} must be positive, got {value}")
        self.stage = stage
        self.value = value


class NoGroundTruth(ValidationError):
    """A precision-recall curve was requested with zero ground-truth boxes."""


class EmptyCurve(ValidationError):
    """Average precision was requested for a curve without points."""


class DataFormatError(MaskwatchError):
    """
    Malformed input files.

    Raised when a gallery, checkpoint, script, dataset or annotation file
    cannot be parsed. Carries the offending line number when one is known.
    """

    def __init__(
        self,
        message: str,
        path: str | None = None,
        line_number: int | None = None,
        cause: Exception | None = None,
    ) -> None:
        """
        Initialize format error.

        Args:
            message: Error description
            path: File being parsed (if any)
            line_number: 1-based line number of the offending line (if known)
            cause: Original exception that caused this error
        """
        if line_number is not None:
            message = f"line {line_number}: {message}"
        if path is not None:
            message = f"{path}: {message}"
        super().__init__(message, cause)
        self.path = path
        self.line_number = line_number


class FormatError(DataFormatError):
    """Bad header, dimension or normalization in a stored artifact."""


class ScriptParseError(DataFormatError):
    """Invalid FRAME/FACE line in a pipeline frame script."""


class IoFailure(MaskwatchError):
    """Reading or writing a file failed at the operating-system level."""

    def __init__(self, message: str, path: str | None = None, cause: Exception | None = None):
        super().__init__(message, cause)
        self.path = path


class RegistryError(MaskwatchError):
    """Model registry failures."""

    def __init__(self, message: str, key: str | None = None, cause: Exception | None = None):
        super().__init__(message, cause)
        self.key = key


class UnknownKey(RegistryError):
    """No loader is registered for the requested model key."""


class LoaderFailure(RegistryError):
    """The loader for a model key raised; the failure is cached."""


class SinkUnavailable(MaskwatchError):
    """An alert transport could not deliver the message."""


class InvariantViolation(MaskwatchError):
    """
    Internal consistency check failed.

    Raised when an output fails a property the library guarantees (event
    grammar, unit norms). Mapped to exit code 3 by the CLI.
    """
