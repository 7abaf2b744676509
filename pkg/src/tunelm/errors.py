"""Exception hierarchy shared across the workbench."""

from __future__ import annotations


class TuneLmError(Exception):
    """Base class for all workbench errors."""


class IngestError(TuneLmError):
    """The data dump could not be read at all (not a per-record problem)."""


class UnparseableKeyError(TuneLmError):
    """A key field could not be interpreted as root + mode."""


class TokenizeError(TuneLmError):
    """An ABC body could not be tokenized.

    Carries the character position where scanning stopped.
    """

    def __init__(self, message: str, position: int | None = None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class TranspositionRangeError(TuneLmError):
    """A transposed pitch fell outside the representable range."""


class DetokenizeError(TuneLmError):
    """A token sequence could not be rendered back to ABC text."""


class UnsupportedStructureError(TuneLmError):
    """Repeat structure too tangled to expand (e.g. runaway expansion)."""


class SemanticsError(TuneLmError):
    """A grammatically plausible sequence has no musical interpretation."""


class VocabularyError(TuneLmError):
    """Problems building or applying a vocabulary (empty corpus, unknown token)."""


class NumericError(TuneLmError):
    """Non-finite values encountered during model evaluation or training."""

    def __init__(self, message: str, parameter: str | None = None):
        self.parameter = parameter
        if parameter is not None:
            message = f"{message} (parameter: {parameter})"
        super().__init__(message)


class BatchingError(TuneLmError):
    """A corpus cannot be cut into the requested minibatch shape."""


class CheckpointError(TuneLmError):
    """A checkpoint file is missing, truncated, or inconsistent."""


class GenerationError(TuneLmError):
    """Bad seed or configuration handed to the sampler."""
