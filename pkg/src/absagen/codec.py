"""Marker linearization codec.

Targets look like "[A] soup [C] food quality [P] great", tuples joined by the
separator; inputs are "<sentence> | <marker hint>". parse_output is the
tolerant inverse used on model output: it never raises, returns a tuple set
plus diagnostics, and drops only blocks whose meaning cannot be recovered.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import CodecError, ParseError
from .schema import (
    AspectTerm,
    Category,
    Polarity,
    SchemaConfig,
    SentimentTuple,
    Task,
    collapse_ws,
    from_generation_space,
    to_generation_space,
)

# diagnostic kinds
MISSING_MARKER = "missing-marker"
UNKNOWN_CATEGORY = "unknown-category"
UNKNOWN_POLARITY = "unknown-polarity"
TRAILING_GARBAGE = "trailing-garbage"
EMPTY_ELEMENT = "empty-element"
TRUNCATION = "truncation"
UNSTRUCTURED_REPLY = "unstructured-reply"


@dataclass(frozen=True)
class Diagnostic:
    kind: str
    message: str
    block: int | None = None


@dataclass(frozen=True)
class InputSequence:
    sentence: str
    hint: tuple[str, ...]

    @property
    def rendered(self) -> str:
        return f"{self.sentence} | {' '.join(self.hint)}"


@dataclass(frozen=True)
class TargetSequence:
    tuples: tuple[SentimentTuple, ...]
    rendered: str


def build_input(sentence: str, task: Task, cfg: SchemaConfig) -> InputSequence:
    sentence = collapse_ws(sentence)
    if not sentence:
        raise CodecError("empty sentence")
    hint = tuple(cfg.markers[e] for e in task.elements)
    return InputSequence(sentence=sentence, hint=hint)


def build_target(
    tuples: Sequence[SentimentTuple], task: Task, cfg: SchemaConfig
) -> TargetSequence:
    """Linearize tuples in the given order, restricted to the task's
    elements. Empty tuple lists are an error: gold sentences without
    opinions are dropped at ingest, not rendered as empty targets."""
    if not tuples:
        raise CodecError("cannot build a target from zero tuples")
    restricted = tuple(t.restricted(task) for t in tuples)
    blocks = []
    for t in restricted:
        phrases = to_generation_space(t, cfg, task)
        parts = [
            f"{cfg.markers[el]} {phrase}"
            for el, phrase in zip(task.elements, phrases)
        ]
        blocks.append(" ".join(parts))
    return TargetSequence(
        tuples=restricted, rendered=f" {cfg.separator} ".join(blocks)
    )


def _marker_pattern(markers: Sequence[str]) -> re.Pattern:
    return re.compile("|".join(re.escape(m) for m in markers))


def parse_output(
    text: str, task: Task, cfg: SchemaConfig
) -> tuple[set[SentimentTuple], list[Diagnostic]]:
    """Parse model output back into a tuple set.

    Tolerant by design: marker matching allows any whitespace run around the
    exact marker strings, leading/trailing junk inside a block is reported
    but the marked portion is still salvaged, and malformed blocks (missing
    or ill-ordered markers, unknown phrases, empty elements) are dropped
    with a diagnostic each. Never raises.
    """
    tuples: set[SentimentTuple] = set()
    diags: list[Diagnostic] = []
    sep_split = re.compile(r"\s*" + re.escape(cfg.separator) + r"\s*")
    expected = [cfg.markers[e] for e in task.elements]
    pattern = _marker_pattern(expected)

    for i, block in enumerate(sep_split.split(text)):
        block = block.strip()
        if not block:
            diags.append(Diagnostic(MISSING_MARKER, f"block {i} is empty", i))
            continue
        found = list(pattern.finditer(block))
        if [m.group(0) for m in found] != expected:
            got = [m.group(0) for m in found] or ["<none>"]
            diags.append(
                Diagnostic(
                    MISSING_MARKER,
                    f"block {i}: expected markers {' '.join(expected)}, "
                    f"found {' '.join(got)}",
                    i,
                )
            )
            continue
        if found[0].start() > 0:
            diags.append(
                Diagnostic(
                    TRAILING_GARBAGE,
                    f"block {i}: stray text "
                    f"{block[: found[0].start()].strip()!r} before "
                    f"{expected[0]}",
                    i,
                )
            )
        spans = []
        for j, m in enumerate(found):
            end = found[j + 1].start() if j + 1 < len(found) else len(block)
            spans.append(collapse_ws(block[m.end() : end]))
        if any(not s for s in spans):
            empty = [
                expected[j] for j, s in enumerate(spans) if not s
            ]
            diags.append(
                Diagnostic(
                    EMPTY_ELEMENT,
                    f"block {i}: no content after {' '.join(empty)}",
                    i,
                )
            )
            continue
        try:
            tuples.add(from_generation_space(spans, cfg, task))
        except ParseError as err:
            kind = (
                UNKNOWN_CATEGORY if err.kind == "category" else UNKNOWN_POLARITY
            )
            diags.append(Diagnostic(kind, f"block {i}: {err}", i))
    return tuples, diags


# ── dataset-space JSON mapping ───────────────────────────────────────────

def tuple_to_record(t: SentimentTuple) -> dict:
    """Dataset-space dict; absent elements are omitted, not null."""
    rec: dict = {"aspect": t.aspect.to_dataset()}
    if t.category is not None:
        rec["category"] = t.category.raw
    if t.polarity is not None:
        rec["polarity"] = t.polarity.value
    return rec


def tuple_from_record(rec: Mapping) -> SentimentTuple:
    if "aspect" not in rec:
        raise CodecError(f"tuple record lacks 'aspect': {rec!r}")
    return SentimentTuple(
        aspect=AspectTerm.from_dataset(str(rec["aspect"])),
        category=(
            Category.from_raw(str(rec["category"]))
            if rec.get("category") is not None
            else None
        ),
        polarity=(
            Polarity.from_dataset(str(rec["polarity"]))
            if rec.get("polarity") is not None
            else None
        ),
    )


def write_jsonl(records: Iterable[Mapping], path: str | Path) -> int:
    """Write one JSON object per line, atomically (tmp file + rename)."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    n = 0
    with tmp.open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
            n += 1
    os.replace(tmp, path)
    return n


def read_jsonl(path: str | Path) -> Iterator[dict]:
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as err:
                raise CodecError(f"{path}:{lineno}: bad JSON: {err}") from None
