"""Greedy constrained decoding harness and the brute-force language oracle.

Scorers are pluggable: anything with score(prefix_ids, input_ids) -> vector
of vocabulary size works. The harness masks scores through the constraint
engine each step, picks the argmax (ties resolve to the lowest id), and
stops on eos or max_len. Everything here is deterministic given (scorer,
seed, inputs), including under batch parallelism.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Protocol, Sequence

import numpy as np
import requests

from .codec import TRUNCATION, Diagnostic, InputSequence, parse_output
from .constraints import ConstraintEngine, ConstraintMode, mask_scores
from .errors import (
    AbsagenError,
    ClientError,
    ResponseFormatError,
    ShapeError,
    SizeError,
)
from .schema import SchemaConfig, SentimentTuple, Task
from .tokenization import Vocabulary


class Scorer(Protocol):
    """Next-token scorer. concurrency_safe=False forces serial batching."""

    concurrency_safe: bool

    def score(
        self, prefix: Sequence[int], input_ids: Sequence[int]
    ) -> np.ndarray: ...


class ScriptedScorer:
    """Deterministic scorer that replays a fixed token program per input.

    Programs are keyed by the encoded input sequence; at step t the scorer
    puts a high score on program[t] (eos once the program is exhausted) and
    zero elsewhere. Used for oracle tests and offline pipeline runs.
    """

    concurrency_safe = True

    def __init__(
        self,
        programs: Mapping[Sequence[int], Sequence[int]],
        vocab_size: int,
        eos_id: int,
        peak: float = 100.0,
    ):
        self._programs = {tuple(k): tuple(v) for k, v in programs.items()}
        self._size = vocab_size
        self._eos = eos_id
        self._peak = peak

    @classmethod
    def from_targets(
        cls, pairs: Mapping[str, str], vocab: Vocabulary
    ) -> "ScriptedScorer":
        """Build from {input text: target text}, both encoded with vocab."""
        programs = {
            tuple(vocab.encode(inp)): tuple(vocab.encode(tgt))
            for inp, tgt in pairs.items()
        }
        return cls(programs, vocab.size, vocab.eos_id)

    @classmethod
    def from_file(
        cls,
        path: str | Path,
        inputs_by_id: Mapping[str, str],
        vocab: Vocabulary,
    ) -> "ScriptedScorer":
        """Load a JSON file {"programs": {"<record id>": "<target text>"}}.

        inputs_by_id maps record id to its rendered input text, which is
        what the scorer actually sees at run time. Two records rendering to
        the same input cannot be told apart and are rejected.
        """
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(data, dict) or not isinstance(
            data.get("programs"), dict
        ):
            raise AbsagenError(f"{path}: expected a top-level 'programs' map")
        programs: dict[tuple[int, ...], tuple[int, ...]] = {}
        for rid, target in data["programs"].items():
            if rid not in inputs_by_id:
                raise AbsagenError(f"{path}: program for unknown id {rid!r}")
            key = tuple(vocab.encode(inputs_by_id[rid]))
            prog = tuple(vocab.encode(str(target)))
            if programs.get(key, prog) != prog:
                raise AbsagenError(
                    f"{path}: id {rid!r} renders the same input as another "
                    "id but scripts a different target"
                )
            programs[key] = prog
        return cls(programs, vocab.size, vocab.eos_id)

    def score(
        self, prefix: Sequence[int], input_ids: Sequence[int]
    ) -> np.ndarray:
        program = self._programs.get(tuple(input_ids))
        if program is None:
            raise AbsagenError("no scripted program for this input")
        step = len(prefix)
        target = program[step] if step < len(program) else self._eos
        out = np.zeros(self._size)
        out[target] = self._peak
        return out


class RandomScorer:
    """Seeded random scorer. The score vector is a pure function of (seed,
    input_ids, prefix), so results are identical across runs, orderings and
    thread counts."""

    concurrency_safe = True

    def __init__(self, vocab_size: int, seed: int = 0):
        self._size = vocab_size
        self._seed = seed

    def score(
        self, prefix: Sequence[int], input_ids: Sequence[int]
    ) -> np.ndarray:
        h = hashlib.blake2b(digest_size=8)
        h.update(str(self._seed).encode())
        h.update(b"|")
        h.update(" ".join(map(str, input_ids)).encode())
        h.update(b"|")
        h.update(" ".join(map(str, prefix)).encode())
        rng = np.random.default_rng(int.from_bytes(h.digest(), "big"))
        return rng.standard_normal(self._size)


class RemoteScorer:
    """Scorer backed by an HTTP endpoint: POST {prefix, input} -> {scores}."""

    concurrency_safe = True

    def __init__(self, endpoint: str, vocab_size: int, timeout: float = 30.0):
        self._endpoint = endpoint
        self._size = vocab_size
        self._timeout = timeout

    def score(
        self, prefix: Sequence[int], input_ids: Sequence[int]
    ) -> np.ndarray:
        try:
            resp = requests.post(
                self._endpoint,
                json={"prefix": list(prefix), "input": list(input_ids)},
                timeout=self._timeout,
            )
        except requests.RequestException as err:
            raise ClientError(f"score request failed: {err}") from err
        if resp.status_code != 200:
            raise ClientError(f"score endpoint returned {resp.status_code}")
        try:
            scores = resp.json()["scores"]
        except (ValueError, KeyError) as err:
            raise ResponseFormatError(
                f"score endpoint reply malformed: {err}"
            ) from err
        return np.asarray(scores, dtype=float)


@dataclass(frozen=True)
class DecodeResult:
    token_ids: tuple[int, ...] = ()
    text: str = ""
    tuples: frozenset[SentimentTuple] = frozenset()
    diagnostics: tuple[Diagnostic, ...] = ()
    steps: int = 0
    finished: bool = False
    error: str | None = None


def greedy_decode(
    scorer: Scorer,
    source: InputSequence,
    task: Task,
    cfg: SchemaConfig,
    vocab: Vocabulary,
    mode: ConstraintMode | str = ConstraintMode.TRIE,
    max_len: int = 256,
    masking: bool = True,
) -> DecodeResult:
    """Greedy decode one input. masking=False bypasses the engine (for
    measuring unconstrained behavior); generation then stops only on eos or
    max_len and the output may be arbitrarily malformed."""
    input_ids = tuple(vocab.encode(source.rendered))
    engine = ConstraintEngine(task, cfg, vocab, mode, source.sentence)
    state = engine.initial_state()
    ids: list[int] = []
    finished = False
    steps = 0
    for _ in range(max_len):
        scores = np.asarray(scorer.score(tuple(ids), input_ids), dtype=float)
        if scores.ndim != 1 or scores.shape[0] != vocab.size:
            raise ShapeError(
                f"scorer returned shape {scores.shape}, expected "
                f"({vocab.size},)"
            )
        steps += 1
        if masking:
            cands = engine.allowed_next(state)
            masked = mask_scores(scores, cands, vocab.eos_id)
            tok = int(np.argmax(masked))
            if not np.isfinite(masked[tok]):
                # scorer put -inf on every candidate; fall back to the
                # lowest allowed id (eos first if permitted)
                tok = vocab.eos_id if cands.allow_eos else min(cands.ids)
            if tok == vocab.eos_id:
                finished = True
                break
            state = engine.advance(state, tok)
        else:
            tok = int(np.argmax(scores))
            if tok == vocab.eos_id:
                finished = True
                break
        ids.append(tok)
    text = vocab.decode(ids)
    tuples, diags = parse_output(text, task, cfg)
    if not finished:
        diags.append(
            Diagnostic(
                TRUNCATION, f"hit max_len={max_len} before eos", None
            )
        )
    return DecodeResult(
        token_ids=tuple(ids),
        text=text,
        tuples=frozenset(tuples),
        diagnostics=tuple(diags),
        steps=steps,
        finished=finished,
    )


def batch_decode(
    scorer: Scorer,
    sources: Sequence[InputSequence],
    task: Task,
    cfg: SchemaConfig,
    vocab: Vocabulary,
    mode: ConstraintMode | str = ConstraintMode.TRIE,
    max_len: int = 256,
    masking: bool = True,
    max_workers: int = 4,
) -> list[DecodeResult]:
    """Decode many inputs, preserving order. A failure in one item becomes
    DecodeResult.error for that item and never poisons the rest."""

    def one(src: InputSequence) -> DecodeResult:
        try:
            return greedy_decode(
                scorer, src, task, cfg, vocab, mode, max_len, masking
            )
        except AbsagenError as err:
            return DecodeResult(error=str(err))

    serial = not getattr(scorer, "concurrency_safe", False)
    if serial or max_workers <= 1 or len(sources) <= 1:
        return [one(s) for s in sources]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(one, sources))


def enumerate_language(
    task: Task,
    cfg: SchemaConfig,
    vocab: Vocabulary,
    mode: ConstraintMode | str,
    sentence: str,
    max_len: int = 25,
) -> set[tuple[int, ...]]:
    """Every complete sequence (eos-ready prefix) reachable under the
    constraints, by exhaustive DFS. Complete sequences exclude eos itself.

    Deliberately bounded to toy sizes: the walk is exponential and exists
    to oracle-check the engine, not to run at scale.
    """
    if vocab.size > 64:
        raise SizeError(f"vocabulary size {vocab.size} > 64; oracle only")
    if max_len > 30:
        raise SizeError(f"max_len {max_len} > 30; oracle only")
    engine = ConstraintEngine(task, cfg, vocab, mode, sentence)
    out: set[tuple[int, ...]] = set()

    def walk(state) -> None:
        cands = engine.allowed_next(state)
        if cands.allow_eos:
            out.add(state.generated)
        if len(state.generated) >= max_len:
            return
        for tok in sorted(cands.ids):
            walk(engine.advance(state, tok))

    walk(engine.initial_state())
    return out
