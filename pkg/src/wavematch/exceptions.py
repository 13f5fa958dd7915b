"""Exception hierarchy shared across the package."""


class WavematchError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(WavematchError, ValueError):
    pass


class UndefinedCorrelationError(WavematchError, ValueError):
    """Raised when a Pearson correlation is requested for a zero-variance input."""


class NotInitializedError(WavematchError, RuntimeError):
    """Raised when the engine is stepped before an interval template is loaded."""


class CalibrationFailedError(WavematchError):
    """No offset in the sweep separated true windows from background.

    The best report seen during the sweep is kept on ``report``.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class TraceFormatError(WavematchError, ValueError):
    """Base class for trace/template file parse errors."""


class BadMagicError(TraceFormatError):
    pass


class UnsupportedVersionError(TraceFormatError):
    pass


class TruncatedPayloadError(TraceFormatError):
    pass


class SampleRangeError(TraceFormatError, InvalidArgumentError):
    """A sample lies outside the configured precision range."""


class ResourceBudgetError(WavematchError):
    """A design does not fit the requested device budget."""
