"""Per-step candidate computation for marker-format generation.

The decoder walks a small state machine over the generated ids. At every
step the machine classifies the prefix into one row of the candidate table
and returns the token ids a well-formed continuation may use:

    (empty)             -> "["
    ... [X  (X pending) -> "]"
    ... [A]             -> aspect content: sentence tokens + null phrase
    ... [C]             -> category content
    ... [P]             -> polarity content
    ... [A] ...         -> same content pool, plus "["
    ... [C] ...         -> same content pool, plus "["
    ... [P] ...         -> same content pool, plus "[" and eos
    ... [A] ... [       -> next marker letter ("C" under TASD)
    ... [;]             -> "["
    ... [;] [           -> "A"

Two strictness modes share the classifier and differ only in the content
pools. Bag mode offers the token multiset of the source phrase inventory
(any order, any multiplicity), which is the algorithm of record. Trie mode
strengthens content to exact phrase continuations: aspects must be
contiguous sentence spans or the null phrase, categories and polarities
must be schema phrases, and "["/eos are offered only at phrase ends.

Tasks with fewer elements delete the absent marker row and splice the
successor chain, so e.g. e2e goes A -> P -> ";" directly. eos is only ever
offered mid-content of the task's final element, which entails at least one
finished tuple.

States are value-like and immutable; the engine holds only immutable tries
and id tables, so states and engines may cross threads freely.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import (
    CodecError,
    ConstraintViolation,
    ShapeError,
    StateError,
)
from .schema import Element, SchemaConfig, Task, collapse_ws
from .tokenization import (
    MarkerTokenMap,
    TokenTrie,
    Vocabulary,
    build_span_trie,
    build_trie,
    sentence_token_bag,
)


class ConstraintMode(enum.Enum):
    BAG = "bag"
    TRIE = "trie"


@dataclass(frozen=True)
class CandidateSet:
    """Allowed next token ids. eos is carried as a flag, never as an id."""

    ids: frozenset[int]
    allow_eos: bool

    def admits(self, token: int, eos_id: int) -> bool:
        if token == eos_id:
            return self.allow_eos
        return token in self.ids


@dataclass(frozen=True)
class DecoderState:
    """Prefix of generated ids plus derived structure.

    Every derived field is a pure function of generated (plus the engine's
    immutable configuration): the incremental update in advance() must agree
    with full recomputation, and a test holds it to that. last_special is
    the letter of the most recently completed marker; eos never enters
    generated, it only flips finished.
    """

    generated: tuple[int, ...] = ()
    count_open: int = 0
    count_close: int = 0
    last_open_position: int = -1
    last_special: str | None = None
    last_token: int | None = None
    pending_letter: str | None = None
    content_len: int = 0
    trie_node: int = -1
    finished: bool = False


@dataclass(frozen=True)
class ExplainResult:
    row: str
    pattern: str
    candidates: tuple[str, ...]
    allow_eos: bool


class ConstraintEngine:
    """Candidate computation for one (sentence, task, schema, mode) session.

    Immutable after construction; allowed_next/advance are pure in the
    state argument.
    """

    def __init__(
        self,
        task: Task,
        cfg: SchemaConfig,
        vocab: Vocabulary,
        mode: ConstraintMode | str,
        sentence: str,
    ):
        self.task = task
        self.cfg = cfg
        self.vocab = vocab
        self.mode = ConstraintMode(mode)
        self.markers = MarkerTokenMap(vocab, cfg)
        self.sentence = collapse_ws(sentence)
        if not self.sentence:
            raise CodecError("empty sentence")
        self._sentence_ids = vocab.encode(self.sentence)

        # letter bookkeeping, restricted to the task's elements
        self._letter_name: dict[int, str] = {}
        for el in Element:
            self._letter_name[self.markers.letter_id(el)] = cfg.marker_letter(el)
        self._letter_name[self.markers.separator_letter_id] = (
            cfg.separator_letter
        )
        self._sep_letter = cfg.separator_letter
        self._element_by_letter = {
            cfg.marker_letter(el): el for el in task.elements
        }
        first = self.markers.letter_id(task.elements[0])
        self._successor: dict[str | None, int] = {
            None: first,
            self._sep_letter: first,
        }
        for i, el in enumerate(task.elements):
            if i + 1 < len(task.elements):
                nxt = self.markers.letter_id(task.elements[i + 1])
            else:
                nxt = self.markers.separator_letter_id
            self._successor[cfg.marker_letter(el)] = nxt

        null_ids = vocab.encode(cfg.null_phrase)
        if self.mode is ConstraintMode.BAG:
            pools: dict[Element, frozenset[int]] = {}
            for el in task.elements:
                if el is Element.ASPECT:
                    pools[el] = sentence_token_bag(self.sentence, vocab) | set(
                        null_ids
                    )
                elif el is Element.CATEGORY:
                    ids: set[int] = set()
                    for c in cfg.categories:
                        ids.update(vocab.encode(c.phrase))
                    pools[el] = frozenset(ids)
                else:
                    ids = set()
                    for phrase in cfg.polarity_phrases.values():
                        ids.update(vocab.encode(phrase))
                    pools[el] = frozenset(ids)
            self._pools = pools
            self._tries: dict[Element, TokenTrie] = {}
        else:
            tries: dict[Element, TokenTrie] = {}
            for el in task.elements:
                if el is Element.ASPECT:
                    tries[el] = build_span_trie(self._sentence_ids, [null_ids])
                elif el is Element.CATEGORY:
                    tries[el] = build_trie(
                        [c.phrase for c in cfg.categories], vocab
                    )
                else:
                    tries[el] = build_trie(
                        list(cfg.polarity_phrases.values()), vocab
                    )
            self._tries = tries
            self._pools = {}

    # ── state construction ───────────────────────────────────────────────

    def initial_state(self) -> DecoderState:
        return DecoderState()

    def state_from_tokens(self, tokens: Sequence[int]) -> DecoderState:
        """Rebuild state by replay. Trie mode insists the prefix is
        reachable and raises StateError otherwise; bag mode tolerates any
        token sequence and recomputes the structural fields."""
        state = self.initial_state()
        for tok in tokens:
            if self.mode is ConstraintMode.BAG:
                state = self._fold(state, tok)
            else:
                try:
                    state = self.advance(state, tok)
                except ConstraintViolation as err:
                    raise StateError(
                        f"prefix unreachable under trie constraints: {err}"
                    ) from err
        return state

    # ── candidate computation ────────────────────────────────────────────

    def allowed_next(self, state: DecoderState) -> CandidateSet:
        return self._classify(state)[1]

    def advance(self, state: DecoderState, token: int) -> DecoderState:
        row, cands = self._classify(state)
        if token == self.markers.eos_id:
            if not cands.allow_eos:
                raise ConstraintViolation(
                    f"eos not allowed at row {row!r}", token, row
                )
            return replace(state, last_token=token, finished=True)
        if not cands.admits(token, self.markers.eos_id):
            piece = self.vocab.id_to_piece(token)
            raise ConstraintViolation(
                f"token {token} ({piece!r}) not allowed at row {row!r}",
                token,
                row,
            )
        return self._fold(state, token)

    def explain(self, state: DecoderState) -> ExplainResult:
        row, cands = self._classify(state)
        return ExplainResult(
            row=row,
            pattern=self._pattern(row, state),
            candidates=tuple(
                self.vocab.id_to_piece(i) for i in sorted(cands.ids)
            ),
            allow_eos=cands.allow_eos,
        )

    def _classify(self, state: DecoderState) -> tuple[str, CandidateSet]:
        m = self.markers
        if state.finished:
            raise StateError("sequence already finished with eos")
        if state.count_open == 0:
            return "start", CandidateSet(frozenset({m.open_id}), False)
        if state.pending_letter is not None:
            return "close-marker", CandidateSet(frozenset({m.close_id}), False)
        if state.last_token == m.open_id:
            nxt = self._successor[state.last_special]
            return (
                f"open-letter:{self._letter_name[nxt]}",
                CandidateSet(frozenset({nxt}), False),
            )
        if state.last_special is None:
            # recovered bag-mode state with junk before any marker
            return "start", CandidateSet(frozenset({m.open_id}), False)
        if state.last_special == self._sep_letter:
            return "after-separator", CandidateSet(
                frozenset({m.open_id}), False
            )
        element = self._element_by_letter[state.last_special]
        final = element is self.task.final_element
        if self.mode is ConstraintMode.BAG:
            pool = self._pools[element]
            if state.content_len == 0:
                return (
                    f"element-start:{element.value}",
                    CandidateSet(pool, False),
                )
            return (
                f"element-content:{element.value}",
                CandidateSet(pool | {m.open_id}, final),
            )
        trie = self._tries[element]
        if state.trie_node < 0:
            raise StateError("trie cursor lost; prefix not reachable")
        conts = trie.children(state.trie_node)
        if state.content_len == 0:
            return (
                f"element-start:{element.value}",
                CandidateSet(conts, False),
            )
        if trie.is_terminal(state.trie_node):
            return (
                f"element-content:{element.value}",
                CandidateSet(conts | {m.open_id}, final),
            )
        return f"element-content:{element.value}", CandidateSet(conts, False)

    # ── folding ──────────────────────────────────────────────────────────

    def _fold(self, state: DecoderState, token: int) -> DecoderState:
        """Structural update, no admissibility check. Tolerates arbitrary
        sequences so bag-mode replay can recover from junk prefixes."""
        if state.finished:
            raise StateError("cannot extend a finished sequence")
        m = self.markers
        gen = state.generated + (token,)
        if token == m.eos_id:
            return replace(state, last_token=token, finished=True)
        if token == m.open_id:
            return DecoderState(
                generated=gen,
                count_open=state.count_open + 1,
                count_close=state.count_close,
                last_open_position=len(state.generated),
                last_special=state.last_special,
                last_token=token,
                pending_letter=None,
                content_len=0,
                trie_node=-1,
            )
        if token == m.close_id:
            special = (
                state.pending_letter
                if state.pending_letter is not None
                else state.last_special
            )
            node = -1
            if self.mode is ConstraintMode.TRIE:
                el = self._element_by_letter.get(special or "")
                if el is not None:
                    node = self._tries[el].root
            return DecoderState(
                generated=gen,
                count_open=state.count_open,
                count_close=state.count_close + 1,
                last_open_position=state.last_open_position,
                last_special=special,
                last_token=token,
                pending_letter=None,
                content_len=0,
                trie_node=node,
            )
        if state.last_token == m.open_id and token in self._letter_name:
            return replace(
                state,
                generated=gen,
                last_token=token,
                pending_letter=self._letter_name[token],
            )
        node = state.trie_node
        if self.mode is ConstraintMode.TRIE and node >= 0:
            element = (
                self._element_by_letter.get(state.last_special or "")
            )
            if element is not None:
                node = self._tries[element].step(node, token)
        return replace(
            state,
            generated=gen,
            last_token=token,
            content_len=state.content_len + 1,
            trie_node=node,
        )

    # ── display ──────────────────────────────────────────────────────────

    def _pattern(self, row: str, state: DecoderState) -> str:
        cfg = self.cfg
        if row == "start":
            return "(empty)"
        if row == "close-marker":
            return f"... [{state.pending_letter}"
        if row == "after-separator":
            return f"... {cfg.separator}"
        if row.startswith("open-letter:"):
            if state.last_special is None:
                return "... ["
            if state.last_special == self._sep_letter:
                return f"... {cfg.separator} ["
            el = self._element_by_letter[state.last_special]
            return f"... {cfg.markers[el]} ... ["
        element = Element(row.split(":", 1)[1])
        marker = cfg.markers[element]
        if row.startswith("element-start:"):
            return f"... {marker}"
        return f"... {marker} ..."


def mask_scores(
    scores: Sequence[float] | np.ndarray,
    candidates: CandidateSet,
    eos_id: int,
) -> np.ndarray:
    """Return a copy of scores with every disallowed position at -inf.

    If candidates cover the whole vocabulary and eos is allowed, the copy
    equals the input.
    """
    arr = np.asarray(scores, dtype=float)
    if arr.ndim != 1:
        raise ShapeError(f"scores must be 1-d, got shape {arr.shape}")
    size = arr.shape[0]
    keep = list(candidates.ids)
    if any(not 0 <= i < size for i in keep) or not 0 <= eos_id < size:
        raise ShapeError(
            f"candidate ids exceed score vector of length {size}"
        )
    out = np.full(size, -np.inf)
    if keep:
        out[keep] = arr[keep]
    if candidates.allow_eos:
        out[eos_id] = arr[eos_id]
    return out
