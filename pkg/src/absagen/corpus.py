"""SemEval-style ABSA corpus handling: XML ingestion, JSONL records,
train/dev splitting and dataset statistics.

The XML shape is <sentence id=...><text>...</text><Opinions><Opinion
target=... category=... polarity=... from=... to=.../></Opinions>
</sentence>, nested arbitrarily below the root. Sentences without opinions
are dropped by default (the generation format cannot express an empty
target) and counted, so corpus arithmetic stays auditable.
"""

from __future__ import annotations

import logging
import math
import random
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .codec import tuple_from_record, tuple_to_record
from .errors import IngestError, SchemaError
from .schema import AspectTerm, Category, Polarity, SentimentTuple

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LabeledSentence:
    id: str
    text: str
    language: str
    tuples: tuple[SentimentTuple, ...]

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "language": self.language,
            "tuples": [tuple_to_record(t) for t in self.tuples],
        }

    @classmethod
    def from_record(cls, rec: dict) -> "LabeledSentence":
        for key in ("id", "text"):
            if key not in rec:
                raise IngestError(f"sentence record lacks {key!r}: {rec!r}")
        return cls(
            id=str(rec["id"]),
            text=str(rec["text"]),
            language=str(rec.get("language", "")),
            tuples=tuple(tuple_from_record(t) for t in rec.get("tuples", [])),
        )


@dataclass
class IngestResult:
    """Sentences plus the bookkeeping the stats stage reports."""

    sentences: list[LabeledSentence] = field(default_factory=list)
    dropped_empty: int = 0
    diagnostics: list[str] = field(default_factory=list)


def ingest_xml(
    path: str | Path, language: str = "en", keep_empty: bool = False
) -> IngestResult:
    """Parse one SemEval ABSA XML file.

    Malformed XML is fatal; everything below that degrades per sentence or
    per opinion with a diagnostic line. Offset/target mismatches keep the
    annotated target string.
    """
    path = Path(path)
    try:
        tree = ET.parse(path)
    except ET.ParseError as err:
        raise IngestError(f"{path}: malformed XML: {err}") from None
    except OSError as err:
        raise IngestError(f"{path}: {err}") from None

    result = IngestResult()
    for sent in tree.getroot().iter("sentence"):
        sid = sent.get("id", "")
        text_el = sent.find("text")
        text = text_el.text if text_el is not None else None
        if not sid or not text:
            result.diagnostics.append(
                f"sentence {sid or '<no id>'}: missing id or text, skipped"
            )
            continue
        tuples: list[SentimentTuple] = []
        for op in sent.iter("Opinion"):
            target = op.get("target")
            category = op.get("category")
            polarity = op.get("polarity")
            if target is None or category is None or polarity is None:
                result.diagnostics.append(
                    f"sentence {sid}: opinion lacks target/category/"
                    "polarity, skipped"
                )
                continue
            try:
                cat = Category.from_raw(category)
                pol = Polarity.from_dataset(polarity)
            except SchemaError as err:
                result.diagnostics.append(f"sentence {sid}: {err}, skipped")
                continue
            aspect = AspectTerm.from_dataset(target)
            if not aspect.is_null:
                try:
                    start = int(op.get("from", "0"))
                    end = int(op.get("to", "0"))
                except ValueError:
                    start = end = 0
                if text[start:end] != target:
                    result.diagnostics.append(
                        f"sentence {sid}: target {target!r} not at "
                        f"offsets {start}:{end}; keeping annotation"
                    )
            tuples.append(
                SentimentTuple(aspect=aspect, category=cat, polarity=pol)
            )
        if not tuples and not keep_empty:
            result.dropped_empty += 1
            continue
        result.sentences.append(
            LabeledSentence(
                id=sid, text=text, language=language, tuples=tuple(tuples)
            )
        )
    if result.dropped_empty:
        log.info(
            "%s: dropped %d zero-opinion sentences", path, result.dropped_empty
        )
    return result


def split_train_dev(
    sentences: Sequence[LabeledSentence],
    train_fraction: float = 0.9,
    seed: int = 42,
) -> tuple[list[LabeledSentence], list[LabeledSentence]]:
    """Shuffle with the seed, then the first ceil(fraction * N) go to
    train. Exact partition: train + dev is a permutation of the input."""
    if not sentences:
        raise IngestError("cannot split an empty corpus")
    if not 0.0 < train_fraction < 1.0:
        raise IngestError(f"train fraction {train_fraction} not in (0, 1)")
    pool = list(sentences)
    random.Random(seed).shuffle(pool)
    cut = math.ceil(train_fraction * len(pool))
    return pool[:cut], pool[cut:]


@dataclass(frozen=True)
class CorpusStats:
    sentences: int
    tuples: int
    categories: int
    positive: int
    negative: int
    neutral: int
    null_aspects: int

    def rows(self) -> list[tuple[str, int]]:
        return [
            ("sentences", self.sentences),
            ("tuples", self.tuples),
            ("categories", self.categories),
            ("positive", self.positive),
            ("negative", self.negative),
            ("neutral", self.neutral),
            ("null aspects", self.null_aspects),
        ]


def compute_stats(sentences: Iterable[LabeledSentence]) -> CorpusStats:
    n_sent = 0
    n_tup = 0
    cats: set[str] = set()
    pol_counts = {p: 0 for p in Polarity}
    nulls = 0
    for sent in sentences:
        n_sent += 1
        for t in sent.tuples:
            n_tup += 1
            if t.category is not None:
                cats.add(t.category.raw)
            if t.polarity is not None:
                pol_counts[t.polarity] += 1
            if t.aspect.is_null:
                nulls += 1
    return CorpusStats(
        sentences=n_sent,
        tuples=n_tup,
        categories=len(cats),
        positive=pol_counts[Polarity.POSITIVE],
        negative=pol_counts[Polarity.NEGATIVE],
        neutral=pol_counts[Polarity.NEUTRAL],
        null_aspects=nulls,
    )
