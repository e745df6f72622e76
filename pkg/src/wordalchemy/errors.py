"""Exception types shared across the package."""


class WordAlchemyError(Exception):
    """Base class for all package-specific errors."""


class CorpusFormatError(WordAlchemyError, ValueError):
    """A corpus line could not be parsed or normalized.

    Carries the 1-based line number of the offending line.
    """

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ConfigError(WordAlchemyError, ValueError):
    """A configuration value violates its documented constraints."""


class ShapeError(WordAlchemyError, ValueError):
    """Array shapes are incompatible for an operation."""


class NonFiniteGradientError(WordAlchemyError, FloatingPointError):
    """A gradient contained NaN or Inf; names the parameter."""


class TrainingDivergedError(WordAlchemyError, FloatingPointError):
    """The training loss became non-finite at some step."""

    def __init__(self, step: int, value: float):
        super().__init__(f"non-finite training loss {value!r} at step {step}")
        self.step = step


class CheckpointError(WordAlchemyError, ValueError):
    """Base class for checkpoint (de)serialization problems."""


class CheckpointMagicError(CheckpointError):
    """The stream does not start with the checkpoint magic bytes."""


class CheckpointVersionError(CheckpointError):
    """The checkpoint format version is not supported."""


class CheckpointTruncatedError(CheckpointError):
    """The stream ended before all declared bytes were read."""


class UnknownLanguageError(WordAlchemyError, KeyError):
    """A query named a language with no headword inventory."""


class TargetMissingError(WordAlchemyError, KeyError):
    """The evaluation target word is absent from the candidate list."""
