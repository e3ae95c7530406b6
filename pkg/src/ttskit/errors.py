"""Exception types shared across the toolkit."""

from __future__ import annotations


class ToolkitError(Exception):
    """Base class for every error raised by this package."""


class TimelineParseError(ToolkitError):
    """Malformed timeline input; carries the 1-based line number when known."""

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class CorpusError(ToolkitError):
    """Corpus-level problem (no cases, duplicate case ids, ...)."""


class LexiconError(ToolkitError):
    """Invalid lexicon definition."""


class EmbeddingError(ToolkitError):
    """Malformed embedding input; carries the 1-based line number when known."""

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class MissingEmbeddingError(EmbeddingError):
    """A text has no stored vector. Never silently falls back to another metric."""

    def __init__(self, text: str):
        super().__init__(f"missing embedding for text: {text!r}")
        self.text = text


class AlignmentError(ToolkitError):
    """Invalid alignment request (bad threshold, inconsistent inputs)."""


class MetricUndefinedError(ToolkitError):
    """A metric has no defined value on this input (too few pairs, all ties...)."""


class CohortError(ToolkitError):
    """Cohort construction or outcome ascertainment failure."""


class SurvivalError(ToolkitError):
    """Survival estimation failure."""


class NotIdentifiableError(SurvivalError):
    """A covariate cannot be estimated from the data (constant column, singular information)."""
