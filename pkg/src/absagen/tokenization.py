"""Vocabulary adapters and token tries.

The constraint engine only ever sees token ids, so any tokenizer can drive it
as long as the marker strings survive tokenization as an [open, letter,
close] triple. Two adapters ship here: a deterministic whitespace tokenizer
for tests and oracles, and a file-backed vocabulary (one piece per line,
id = line number) mirroring real subword inventories.
"""

from __future__ import annotations

import re
from pathlib import Path
from typing import Iterable, Protocol, Sequence

from .errors import VocabularyError
from .schema import Element, SchemaConfig

_MARKER_SHAPED = re.compile(r"^\[([^\[\]]+)\]$")


def atomize(text: str) -> list[str]:
    """Whitespace split, with marker-shaped pieces broken into bracket,
    inner, bracket so markers can honor the triple contract."""
    atoms: list[str] = []
    for piece in text.split():
        m = _MARKER_SHAPED.match(piece)
        if m:
            atoms.extend(["[", m.group(1), "]"])
        else:
            atoms.append(piece)
    return atoms


class Vocabulary(Protocol):
    size: int
    eos_id: int
    unk_id: int | None
    bos_id: int | None

    def encode(self, text: str) -> list[int]: ...

    def decode(self, ids: Sequence[int]) -> str: ...

    def id_to_piece(self, i: int) -> str: ...

    def piece_to_id(self, piece: str) -> int | None: ...


def _check_range(i: int, size: int) -> None:
    if not 0 <= i < size:
        raise VocabularyError(f"token id {i} out of range [0, {size})")


def _glue_markers(pieces: list[str]) -> str:
    """Join pieces with spaces, re-gluing maximal ["[", x, "]"] runs back
    into "[x]" so decode inverts the marker atomization."""
    out: list[str] = []
    i = 0
    while i < len(pieces):
        if (
            pieces[i] == "["
            and i + 2 < len(pieces)
            and pieces[i + 2] == "]"
            and pieces[i + 1] not in ("[", "]")
        ):
            out.append(f"[{pieces[i + 1]}]")
            i += 3
        else:
            out.append(pieces[i])
            i += 1
    return " ".join(out)


class WhitespaceVocabulary:
    """Closed-lexicon whitespace tokenizer for tests and oracles.

    Ids are dense: eos at 0 (so uniform-score greedy walks tie-break toward
    termination), unk at 1, the brackets next, then lexicon atoms in
    first-seen order. Unknown words encode to unk.
    """

    def __init__(self, texts: Iterable[str] = ()):
        self._pieces: list[str] = ["</s>", "<unk>", "[", "]"]
        self._ids: dict[str, int] = {p: i for i, p in enumerate(self._pieces)}
        self.eos_id = 0
        self.unk_id = 1
        self.bos_id = None
        for text in texts:
            for atom in atomize(text):
                self._register(atom)

    def _register(self, piece: str) -> int:
        if piece not in self._ids:
            self._ids[piece] = len(self._pieces)
            self._pieces.append(piece)
        return self._ids[piece]

    @classmethod
    def for_schema(
        cls, cfg: SchemaConfig, texts: Iterable[str] = ()
    ) -> "WhitespaceVocabulary":
        """Vocabulary covering every schema phrase and marker plus texts."""
        sources = [cfg.markers[e] for e in Element]
        sources.append(cfg.separator)
        sources.append(cfg.null_phrase)
        sources.extend(cfg.polarity_phrases.values())
        sources.extend(c.phrase for c in cfg.categories)
        sources.extend(texts)
        return cls(sources)

    @property
    def size(self) -> int:
        return len(self._pieces)

    def encode(self, text: str) -> list[int]:
        return [self._ids.get(a, self.unk_id) for a in atomize(text)]

    def decode(self, ids: Sequence[int]) -> str:
        return _glue_markers([self.id_to_piece(i) for i in ids])

    def id_to_piece(self, i: int) -> str:
        _check_range(i, self.size)
        return self._pieces[i]

    def piece_to_id(self, piece: str) -> int | None:
        return self._ids.get(piece)


# word-boundary prefixes used by common subword inventories
_BOUNDARY_CHARS = ("▁", "Ġ")  # sentencepiece "▁", byte-BPE "Ġ"


class FileVocabulary:
    """Vocabulary loaded from a file: UTF-8, one piece per line, id = line
    number (zero-based).

    Plain files are treated as word-level (each whitespace atom must be a
    piece). Files whose pieces carry a sentencepiece/BPE word-boundary
    prefix are segmented by greedy longest match over the boundary-marked
    text instead, which is enough to mirror a real tokenizer's inventory
    without binding to its runtime.
    """

    def __init__(
        self,
        pieces: Sequence[str],
        eos_piece: str = "</s>",
        unk_piece: str = "<unk>",
        bos_piece: str = "<s>",
    ):
        seen: dict[str, int] = {}
        for i, piece in enumerate(pieces):
            if piece == "":
                raise VocabularyError(f"empty piece at id {i}")
            if piece in seen:
                raise VocabularyError(
                    f"duplicate piece {piece!r} at ids {seen[piece]} and {i}"
                )
            seen[piece] = i
        self._pieces = list(pieces)
        self._ids = seen
        if eos_piece not in seen:
            raise VocabularyError(f"vocabulary lacks eos piece {eos_piece!r}")
        self.eos_id = seen[eos_piece]
        self.unk_id = seen.get(unk_piece)
        self.bos_id = seen.get(bos_piece)
        self._boundary = next(
            (
                b
                for b in _BOUNDARY_CHARS
                if any(b in p for p in self._pieces)
            ),
            None,
        )
        self._max_piece_len = max(len(p) for p in self._pieces)

    @classmethod
    def load(cls, path: str | Path, **kw) -> "FileVocabulary":
        raw = Path(path).read_text(encoding="utf-8")
        lines = raw.split("\n")
        if lines and lines[-1] == "":  # trailing newline, not an empty piece
            lines.pop()
        return cls(lines, **kw)

    @property
    def size(self) -> int:
        return len(self._pieces)

    def encode(self, text: str) -> list[int]:
        if self._boundary is not None:
            return self._encode_subword(text)
        out = []
        for atom in atomize(text):
            i = self._ids.get(atom)
            if i is None:
                if self.unk_id is None:
                    raise VocabularyError(
                        f"unknown piece {atom!r} and no unk token"
                    )
                i = self.unk_id
            out.append(i)
        return out

    def _encode_subword(self, text: str) -> list[int]:
        b = self._boundary
        marked = b + b.join(text.split()) if text.split() else ""
        out: list[int] = []
        pos = 0
        while pos < len(marked):
            for ln in range(min(self._max_piece_len, len(marked) - pos), 0, -1):
                i = self._ids.get(marked[pos : pos + ln])
                if i is not None:
                    out.append(i)
                    pos += ln
                    break
            else:
                if self.unk_id is None:
                    raise VocabularyError(
                        f"unsegmentable input at {marked[pos:pos + 8]!r} "
                        "and no unk token"
                    )
                out.append(self.unk_id)
                pos += 1
        return out

    def decode(self, ids: Sequence[int]) -> str:
        pieces = [self.id_to_piece(i) for i in ids]
        if self._boundary is not None:
            return "".join(pieces).replace(self._boundary, " ").strip()
        return _glue_markers(pieces)

    def id_to_piece(self, i: int) -> str:
        _check_range(i, self.size)
        return self._pieces[i]

    def piece_to_id(self, piece: str) -> int | None:
        return self._ids.get(piece)


class MarkerTokenMap:
    """Token-level image of the schema markers under one vocabulary.

    Construction is the load-time contract check: every marker (and the
    separator) must encode to exactly [open, letter, close] with one shared
    bracket pair and pairwise-distinct letters, otherwise the state machine
    would misread its own output. Fails loudly.
    """

    def __init__(self, vocab: Vocabulary, cfg: SchemaConfig):
        triples: dict[str, tuple[int, int, int]] = {}
        for name, marker in [
            *((e.value, cfg.markers[e]) for e in Element),
            ("separator", cfg.separator),
        ]:
            ids = vocab.encode(marker)
            if len(ids) != 3:
                raise VocabularyError(
                    f"marker {marker!r} tokenizes to {len(ids)} ids, "
                    "need exactly [open, letter, close]"
                )
            if vocab.unk_id is not None and vocab.unk_id in ids:
                raise VocabularyError(
                    f"marker {marker!r} hits the unknown token; "
                    "vocabulary cannot represent it"
                )
            triples[name] = tuple(ids)
        opens = {t[0] for t in triples.values()}
        closes = {t[2] for t in triples.values()}
        if len(opens) != 1 or len(closes) != 1:
            raise VocabularyError(
                "markers disagree on bracket ids; one [ and one ] required"
            )
        self.open_id = opens.pop()
        self.close_id = closes.pop()
        letters = {name: t[1] for name, t in triples.items()}
        ids = list(letters.values()) + [self.open_id, self.close_id]
        if len(set(ids)) != len(ids):
            raise VocabularyError("marker letters and brackets must be distinct")
        self.letter_ids = {
            e: letters[e.value] for e in Element
        }
        self.separator_letter_id = letters["separator"]
        self.eos_id = vocab.eos_id
        if self.eos_id in ids:
            raise VocabularyError("eos id collides with a marker id")
        self.element_by_letter_id = {
            v: e for e, v in self.letter_ids.items()
        }

    def letter_id(self, element: Element) -> int:
        return self.letter_ids[element]


class TokenTrie:
    """Prefix tree over token-id sequences.

    Nodes are integers into parallel arrays; 0 is the root. Immutable by
    convention after the build phase (nothing enforces it, nothing mutates
    it either).
    """

    __slots__ = ("_children", "_terminal")

    def __init__(self):
        self._children: list[dict[int, int]] = [{}]
        self._terminal: list[bool] = [False]

    @property
    def root(self) -> int:
        return 0

    def insert(self, seq: Sequence[int]) -> None:
        if not seq:
            raise VocabularyError("cannot insert an empty sequence")
        node = 0
        for tok in seq:
            nxt = self._children[node].get(tok)
            if nxt is None:
                nxt = len(self._children)
                self._children[node][tok] = nxt
                self._children.append({})
                self._terminal.append(False)
            node = nxt
        self._terminal[node] = True

    def step(self, node: int, tok: int) -> int:
        """Child node for tok, or -1."""
        return self._children[node].get(tok, -1)

    def children(self, node: int) -> frozenset[int]:
        return frozenset(self._children[node])

    def is_terminal(self, node: int) -> bool:
        return self._terminal[node]

    def walk(self, seq: Sequence[int]) -> int:
        node = 0
        for tok in seq:
            node = self.step(node, tok)
            if node < 0:
                return -1
        return node

    def accepts(self, seq: Sequence[int]) -> bool:
        node = self.walk(seq)
        return node >= 0 and self._terminal[node]

    def continuations(self, prefix: Sequence[int]) -> frozenset[int]:
        node = self.walk(prefix)
        return frozenset() if node < 0 else self.children(node)


def build_trie(phrases: Iterable[str], vocab: Vocabulary) -> TokenTrie:
    """Trie accepting exactly the encoded phrases. A phrase that hits the
    unknown id (or encodes to nothing) names itself in the error."""
    trie = TokenTrie()
    for phrase in phrases:
        ids = vocab.encode(phrase)
        if not ids:
            raise VocabularyError(f"phrase {phrase!r} encodes to no tokens")
        if vocab.unk_id is not None and vocab.unk_id in ids:
            raise VocabularyError(
                f"phrase {phrase!r} contains pieces unknown to the vocabulary"
            )
        trie.insert(ids)
    return trie


def build_span_trie(
    sentence_ids: Sequence[int], extras: Iterable[Sequence[int]] = ()
) -> TokenTrie:
    """Trie of every contiguous token span of the sentence plus extras
    (the null phrase, in practice). n tokens make n(n+1)/2 spans."""
    trie = TokenTrie()
    n = len(sentence_ids)
    for i in range(n):
        for j in range(i + 1, n + 1):
            trie.insert(sentence_ids[i:j])
    for extra in extras:
        trie.insert(extra)
    return trie


def sentence_token_bag(sentence: str, vocab: Vocabulary) -> frozenset[int]:
    return frozenset(vocab.encode(sentence))
