"""Exact-match micro-F1 over tuple sets, with Student-t aggregation across
runs.

A predicted tuple counts iff every element inside the task's subset equals
the gold tuple after dataset-space normalization (whitespace-collapsed
case-sensitive aspects, raw categories, polarity labels). Counts aggregate
over all sentences before the ratio, hence micro.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from scipy import stats as _stats

from .errors import AggregationError, EvalError
from .schema import SentimentTuple, Task


@dataclass(frozen=True)
class EvalReport:
    tp: int
    pred_count: int
    gold_count: int
    precision: float
    recall: float
    f1: float
    by_group: dict = None  # optional {group: EvalReport}, one level deep

    @classmethod
    def from_counts(
        cls, tp: int, pred: int, gold: int, by_group: dict | None = None
    ) -> "EvalReport":
        p = tp / pred if pred else 0.0
        r = tp / gold if gold else 0.0
        f1 = 2 * p * r / (p + r) if p + r else 0.0
        return cls(
            tp=tp,
            pred_count=pred,
            gold_count=gold,
            precision=p,
            recall=r,
            f1=f1,
            by_group=by_group,
        )

    def to_dict(self) -> dict:
        out = {
            "tp": self.tp,
            "pred_count": self.pred_count,
            "gold_count": self.gold_count,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }
        if self.by_group:
            out["by_group"] = {
                k: v.to_dict() for k, v in sorted(self.by_group.items())
            }
        return out


def score(
    pred: Mapping[str, set[SentimentTuple]],
    gold: Mapping[str, set[SentimentTuple]],
    task: Task,
    groups: Mapping[str, str] | None = None,
) -> EvalReport:
    """Micro-F1 over sentences keyed by id.

    pred and gold must cover exactly the same ids. groups optionally maps
    sentence id to a label (language, say) for a per-group breakdown.
    """
    missing = sorted(set(gold) - set(pred))
    extra = sorted(set(pred) - set(gold))
    if missing or extra:
        raise EvalError(
            f"id mismatch: missing from pred {missing[:5]}, "
            f"unknown in pred {extra[:5]}"
        )
    totals: dict[str, list[int]] = {}
    tp = np_ = ng = 0
    for sid in gold:
        p = {t.restricted(task) for t in pred[sid]}
        g = {t.restricted(task) for t in gold[sid]}
        hit = len(p & g)
        tp += hit
        np_ += len(p)
        ng += len(g)
        if groups is not None:
            key = groups.get(sid, "?")
            row = totals.setdefault(key, [0, 0, 0])
            row[0] += hit
            row[1] += len(p)
            row[2] += len(g)
    by_group = None
    if groups is not None:
        by_group = {
            k: EvalReport.from_counts(*v) for k, v in totals.items()
        }
    return EvalReport.from_counts(tp, np_, ng, by_group)


@dataclass(frozen=True)
class RunAggregate:
    runs: tuple[float, ...]
    mean: float
    half_width: float

    @property
    def low(self) -> float:
        return self.mean - self.half_width

    @property
    def high(self) -> float:
        return self.mean + self.half_width


def aggregate(f1_runs: Sequence[float], confidence: float = 0.95) -> RunAggregate:
    """mean ± t(1 - (1-confidence)/2, n-1) * s / sqrt(n), s the sample
    standard deviation. Needs n >= 2."""
    runs = tuple(float(x) for x in f1_runs)
    n = len(runs)
    if n < 2:
        raise AggregationError(f"need at least 2 runs, got {n}")
    mean = sum(runs) / n
    var = sum((x - mean) ** 2 for x in runs) / (n - 1)
    s = math.sqrt(var)
    q = float(_stats.t.ppf(1 - (1 - confidence) / 2, n - 1))
    return RunAggregate(
        runs=runs, mean=mean, half_width=q * s / math.sqrt(n)
    )
