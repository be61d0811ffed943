"""Exception and warning types raised across the toolkit."""


class CovEvalError(Exception):
    """Base class for every structured error raised by this package."""


class InvalidBoxError(CovEvalError, ValueError):
    pass


class ConfigError(CovEvalError, ValueError):
    pass


class MixedGroupError(CovEvalError, ValueError):
    """Entries passed to a per-image, per-class routine disagree on image or class."""


class ParseError(CovEvalError, ValueError):
    """Malformed input file. ``line`` and ``column`` are 1-based when known."""

    def __init__(self, message, *, source=None, line=None, column=None):
        self.source = source
        self.line = line
        self.column = column
        where = []
        if source is not None:
            where.append(str(source))
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class SchemaVersionError(CovEvalError, ValueError):
    pass


class InvalidIndexError(CovEvalError, ValueError):
    pass


class WindowTooSmallError(CovEvalError, ValueError):
    pass


class EstimationError(CovEvalError, ArithmeticError):
    pass


class ResourceLimitError(CovEvalError, MemoryError):
    pass


class EmptySceneError(CovEvalError, ValueError):
    pass


class EmptyEvaluationError(CovEvalError):
    """Nothing to score: no images, or no boxes at all in any image."""


class ExtremeMuWarning(UserWarning):
    """mu of exactly 0 or 1 scores only one side and rewards degenerate detectors."""


class DegenerateScoreWarning(UserWarning):
    """Both XP and XR are zero, F_ext is reported as 0."""
