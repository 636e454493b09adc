"""Primitive-boundary bindings for the constrained-decoding engine.

A session pins one (task, schema, vocabulary, mode, sentence) combination
behind an integer handle. Every call across the boundary exchanges only
integers, floats, strings, and flags, so a host generation loop needs no
engine types on its side: ask for the allowed next-token ids, mask its
own logits, advance, repeat.

Operations take the full generated prefix each time and rebuild decoder
state by replay. That keeps the handle stateless between calls (hosts
may back up, branch, or retry a step freely) and costs O(len(prefix))
per call, which is nothing at structured-target lengths.

Sessions are single-threaded: the thread that opens a handle is the only
one that may use or close it. Open one session per worker thread.
"""

from __future__ import annotations

import itertools
import operator
import threading
from dataclasses import dataclass
from typing import Sequence

import absagen

__version__ = "0.1.0"

__all__ = [
    "BridgeError",
    "ConfigError",
    "ConstraintViolation",
    "SessionError",
    "ShapeError",
    "StateError",
    "VocabularyError",
    "advance",
    "allowed_next",
    "close",
    "decode_text",
    "mask_scores",
    "open_session",
]


# ── errors ───────────────────────────────────────────────────────────────
# Mirrors of the native classes, so hosts can catch by the same names
# without importing the engine package.


class BridgeError(Exception):
    """Base class for everything raised across the bridge boundary."""


class ConfigError(BridgeError):
    """open_session() arguments the engine cannot accept."""


class SessionError(BridgeError):
    """Unknown or closed handle, or use from a thread that did not open it."""


class VocabularyError(BridgeError):
    """Token id outside the session vocabulary, or not an integer."""


class StateError(BridgeError):
    """Prefix not reachable under the session's constraint mode."""


class ShapeError(BridgeError):
    """Score vector that does not cover the candidate ids."""


class ConstraintViolation(BridgeError):
    """Token rejected by the candidate table; carries token_id and row."""

    def __init__(self, message: str, token_id: int, row: str):
        super().__init__(message)
        self.token_id = token_id
        self.row = row


def _translate(err: absagen.AbsagenError) -> BridgeError:
    if isinstance(err, absagen.ConstraintViolation):
        return ConstraintViolation(str(err), err.token_id, err.row)
    if isinstance(err, absagen.VocabularyError):
        return VocabularyError(str(err))
    if isinstance(err, absagen.StateError):
        return StateError(str(err))
    if isinstance(err, absagen.ShapeError):
        return ShapeError(str(err))
    return BridgeError(str(err))


# ── session registry ─────────────────────────────────────────────────────


@dataclass
class _Session:
    engine: absagen.ConstraintEngine
    thread_id: int


_lock = threading.Lock()
_next_handle = itertools.count(1)
_sessions: dict[int, _Session] = {}


def _session(handle: int) -> _Session:
    with _lock:
        sess = _sessions.get(handle)
    if sess is None:
        raise SessionError(f"unknown or closed session handle {handle}")
    if sess.thread_id != threading.get_ident():
        raise SessionError(
            f"session {handle} belongs to the thread that opened it; "
            "open one session per thread"
        )
    return sess


def _check_token(sess: _Session, token) -> int:
    try:
        t = operator.index(token)
    except TypeError as err:
        raise VocabularyError(
            f"token id must be an integer, got {token!r}"
        ) from err
    size = sess.engine.vocab.size
    if not 0 <= t < size:
        raise VocabularyError(f"token id {t} out of range [0, {size})")
    return t


def _replay(sess: _Session, prefix: Sequence[int]):
    ids = [_check_token(sess, t) for t in prefix]
    try:
        return sess.engine.state_from_tokens(ids)
    except absagen.AbsagenError as err:
        raise _translate(err) from err


# ── operations ───────────────────────────────────────────────────────────


def open_session(
    *,
    task: str,
    categories: Sequence[str],
    vocab: Sequence[str],
    mode: str,
    sentence: str,
) -> int:
    """Create an engine session and return its integer handle.

    vocab is the host tokenizer's piece inventory in id order; ids used in
    every later call are indexes into this list. The markers, category
    phrases, polarity words, and sentence words must all be encodable
    with it, and the markers must split as [open, letter, close].
    """
    try:
        engine = absagen.ConstraintEngine(
            absagen.Task.from_key(task),
            absagen.SchemaConfig.from_category_names(categories),
            absagen.FileVocabulary(list(vocab)),
            mode,
            sentence,
        )
    except (absagen.AbsagenError, ValueError) as err:
        raise ConfigError(f"cannot open session: {err}") from err
    with _lock:
        handle = next(_next_handle)
        _sessions[handle] = _Session(engine, threading.get_ident())
    return handle


def allowed_next(
    handle: int, prefix: Sequence[int]
) -> tuple[list[int], bool]:
    """Allowed next-token ids (sorted) and the end-of-sequence flag for
    the state reached by prefix."""
    sess = _session(handle)
    state = _replay(sess, prefix)
    try:
        cands = sess.engine.allowed_next(state)
    except absagen.AbsagenError as err:
        raise _translate(err) from err
    return sorted(cands.ids), bool(cands.allow_eos)


def advance(
    handle: int, prefix: Sequence[int], token: int
) -> tuple[list[int], bool]:
    """Feed one token; return (new prefix, finished flag).

    The eos id finishes the sequence without extending the prefix. A
    token outside the current candidate set raises ConstraintViolation.
    """
    sess = _session(handle)
    state = _replay(sess, prefix)
    tok = _check_token(sess, token)
    try:
        new = sess.engine.advance(state, tok)
    except absagen.AbsagenError as err:
        raise _translate(err) from err
    return list(new.generated), bool(new.finished)


def mask_scores(
    handle: int, prefix: Sequence[int], scores: Sequence[float]
) -> list[float]:
    """Copy scores with every disallowed position set to -inf.

    Drop-in per-step logits processor: argmax/sample over the result can
    only produce tokens the constraint table admits.
    """
    sess = _session(handle)
    state = _replay(sess, prefix)
    try:
        cands = sess.engine.allowed_next(state)
        masked = absagen.mask_scores(scores, cands, sess.engine.vocab.eos_id)
    except absagen.AbsagenError as err:
        raise _translate(err) from err
    return [float(x) for x in masked]


def decode_text(handle: int, ids: Sequence[int]) -> str:
    """Render generated ids as marker text, for hosts without the
    engine-side tokenizer."""
    sess = _session(handle)
    checked = [_check_token(sess, t) for t in ids]
    try:
        return sess.engine.vocab.decode(checked)
    except absagen.AbsagenError as err:
        raise _translate(err) from err


def close(handle: int) -> None:
    """Release the session; every later use of the handle errors."""
    _session(handle)
    with _lock:
        _sessions.pop(handle, None)
