"""Exception hierarchy. Everything raised on purpose derives from AbsagenError
so callers (and the CLI) can catch one base class."""

from __future__ import annotations


class AbsagenError(Exception):
    pass


class SchemaError(AbsagenError):
    """Invalid schema configuration or unknown dataset-space value."""


class ParseError(AbsagenError):
    """A generation-space phrase that maps to nothing.

    Carries the offending phrase and which map rejected it.
    """

    def __init__(self, message: str, phrase: str, kind: str):
        super().__init__(message)
        self.phrase = phrase
        self.kind = kind


class CodecError(AbsagenError):
    """Bad input to sequence building (empty sentence, empty tuple list, ...)."""


class VocabularyError(AbsagenError):
    """Unknown piece, id out of range, or a marker that violates the
    [open, letter, close] tokenization contract."""


class StateError(AbsagenError):
    """Decoder state that the active constraint mode cannot accept."""


class ConstraintViolation(AbsagenError):
    """advance() was fed a token outside the current candidate set."""

    def __init__(self, message: str, token_id: int, row: str):
        super().__init__(message)
        self.token_id = token_id
        self.row = row


class ShapeError(AbsagenError):
    """Score vector length does not match the vocabulary."""


class SizeError(AbsagenError):
    """Enumeration bounds exceeded (vocab or depth too large to brute-force)."""


class EvalError(AbsagenError):
    """Prediction/gold id sets disagree."""


class AggregationError(AbsagenError):
    """Too few runs to form a confidence interval."""


class IngestError(AbsagenError):
    """Unreadable or structurally broken corpus file."""


class PromptError(AbsagenError):
    """Demonstration request that the training head cannot satisfy."""


class ClientError(AbsagenError):
    """Base for remote chat-completion failures."""


class AuthError(ClientError):
    pass


class ClientTimeout(ClientError):
    pass


class ResponseFormatError(ClientError):
    pass


class RetryExhausted(ClientError):
    def __init__(self, message: str, attempts: int, last_status: int | None):
        super().__init__(message)
        self.attempts = attempts
        self.last_status = last_status


class ConfigError(AbsagenError):
    """Invalid run configuration; message lists every problem found."""
