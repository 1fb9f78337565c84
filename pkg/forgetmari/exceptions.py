class MariError(Exception):
    """Base class for every error raised by forgetmari."""


class LengthMismatch(MariError, ValueError):
    """Two distributions (or vectors) that must share a length do not."""


class SupportMismatch(MariError, ValueError):
    """A divergence needs q(v) > 0 wherever p(v) > 0, and it does not hold."""


class DomainError(MariError, ValueError):
    """An argument lies outside the domain of the operation."""


class ShapeMismatch(MariError, ValueError):
    """Array shapes disagree (positions, vocabulary, parameter count)."""


class ArchMismatch(MariError, ValueError):
    """A batch or checkpoint does not fit the model architecture."""


class EmptyBatch(MariError, ValueError):
    """An operation that averages over sequences got none."""


class NonFinite(MariError, ArithmeticError):
    """A gradient or loss contains NaN or Inf."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.message = message
        self.epoch = epoch

    def __str__(self):
        if self.epoch is None:
            return self.message
        return f"{self.message} (epoch {self.epoch})"


class DegenerateGamma(MariError, ValueError):
    """The pathwise probability floor of a sequence is zero."""


class EmptySequence(MariError, ValueError):
    """A detector score was requested for an empty sequence."""


class EmptyScores(MariError, ValueError):
    """ROC-AUC needs at least one member and one non-member score."""


class EmptyText(MariError, ValueError):
    """Sentence splitting got empty text."""


class TooFewSentences(MariError, ValueError):
    """A split needs at least two sentences."""


class UnknownSymbol(MariError, KeyError):
    """Text contains a symbol outside the vocabulary."""

    def __str__(self):
        return str(self.args[0]) if self.args else "unknown symbol"


class CheckpointFormatError(MariError, ValueError):
    """A checkpoint file is truncated or has the wrong magic/header."""


class PhaseError(MariError):
    """An experiment phase failed; carries the phase name."""

    def __init__(self, phase, cause):
        super().__init__(f"phase '{phase}' failed: {cause}")
        self.phase = phase
        self.cause = cause


class InvalidConfigError(MariError):
    """Configuration was not validated successfully according to schema."""

    def __init__(self, message, errors):
        super().__init__(message)
        self.message = message
        self.errors = errors

    def __str__(self):
        return f"InvalidConfigError ({self.message}): {self.errors}"
