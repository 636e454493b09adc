from __future__ import annotations

import math
import random

import pytest

from absagen import (
    AggregationError,
    EvalError,
    Task,
    aggregate,
    score,
)
from conftest import random_tuple_list


def _sets(make, *seeds):
    return {f"s{i}": set(make(seed)) for i, seed in enumerate(seeds)}


def test_score_worked_example(make_tuples):
    gold_tuples = make_tuples(1, max_n=3)
    # two sentences: one predicted perfectly, one half right with an extra
    gold = {"a": set(gold_tuples), "b": set(make_tuples(2, max_n=2))}
    pred = {
        "a": set(gold_tuples),
        "b": set(list(gold["b"])[:1]) | {list(gold["a"])[0]},
    }
    report = score(pred, gold, Task.TASD)
    assert report.tp == len(gold["a"]) + 1
    assert report.pred_count == len(gold["a"]) + 2
    assert report.gold_count == len(gold["a"]) + len(gold["b"])
    p, r = report.precision, report.recall
    assert report.f1 == pytest.approx(2 * p * r / (p + r))


def test_score_perfect_and_empty():
    report = score({"x": set()}, {"x": set()}, Task.TASD)
    assert report.f1 == 0.0 and report.precision == 0.0


def test_score_zero_conventions(make_tuples):
    gold = {"a": set(make_tuples(3))}
    report = score({"a": set()}, gold, Task.TASD)
    assert report.precision == 0.0
    assert report.recall == 0.0
    assert report.f1 == 0.0


def test_score_task_restriction(toy_cfg, make_tuples):
    # tuples that differ only in category collapse under e2e
    gold_tuples = make_tuples(4, max_n=1)
    t = gold_tuples[0]
    other_cat = next(
        c for c in toy_cfg.categories if c != t.category
    )
    variant = type(t)(
        aspect=t.aspect, category=other_cat, polarity=t.polarity
    )
    gold = {"a": {t}}
    pred = {"a": {variant}}
    assert score(pred, gold, Task.TASD).tp == 0
    assert score(pred, gold, Task.E2E_ABSA).tp == 1


def test_score_id_mismatch(make_tuples):
    gold = {"a": set(make_tuples(5))}
    with pytest.raises(EvalError, match="id mismatch"):
        score({}, gold, Task.TASD)
    with pytest.raises(EvalError, match="id mismatch"):
        score({"a": set(), "b": set()}, gold, Task.TASD)


def test_score_matches_brute_force(toy_cfg):
    rng = random.Random(17)
    for _ in range(50):
        ids = [f"s{i}" for i in range(rng.randint(1, 6))]
        gold = {}
        pred = {}
        for sid in ids:
            gold[sid] = set(random_tuple_list(rng, toy_cfg))
            # predictions share some gold tuples and invent others
            keep = {t for t in gold[sid] if rng.random() < 0.6}
            pred[sid] = keep | set(
                random_tuple_list(rng, toy_cfg, max_n=2)
            ) if rng.random() < 0.8 else keep
        for task in (Task.TASD, Task.E2E_ABSA):
            report = score(pred, gold, task)
            tp = sum(
                len(
                    {t.restricted(task) for t in pred[sid]}
                    & {t.restricted(task) for t in gold[sid]}
                )
                for sid in ids
            )
            np_ = sum(len({t.restricted(task) for t in pred[s]}) for s in ids)
            ng = sum(len({t.restricted(task) for t in gold[s]}) for s in ids)
            assert report.tp == tp
            assert report.pred_count == np_ and report.gold_count == ng
            expect_p = tp / np_ if np_ else 0.0
            expect_r = tp / ng if ng else 0.0
            expect_f1 = (
                2 * expect_p * expect_r / (expect_p + expect_r)
                if expect_p + expect_r
                else 0.0
            )
            assert report.f1 == pytest.approx(expect_f1, abs=1e-12)


def test_score_by_group(make_tuples):
    gold = {"a": set(make_tuples(6)), "b": set(make_tuples(7))}
    pred = {"a": gold["a"], "b": set()}
    report = score(
        pred, gold, Task.TASD, groups={"a": "en", "b": "nl"}
    )
    assert set(report.by_group) == {"en", "nl"}
    assert report.by_group["en"].f1 == 1.0
    assert report.by_group["nl"].f1 == 0.0
    assert (
        report.by_group["en"].gold_count + report.by_group["nl"].gold_count
        == report.gold_count
    )
    assert "by_group" in report.to_dict()


def test_aggregate_worked_example():
    # frozen t quantile: t(0.975, df=1) = tan(0.475 * pi) = 12.7062...
    agg = aggregate([0.5, 0.7])
    assert agg.mean == pytest.approx(0.6)
    s = math.sqrt(((0.5 - 0.6) ** 2 + (0.7 - 0.6) ** 2) / 1)
    expect = 12.706204736174698 * s / math.sqrt(2)
    assert agg.half_width == pytest.approx(expect, rel=1e-9)
    assert agg.low == pytest.approx(agg.mean - agg.half_width)
    assert agg.high == pytest.approx(agg.mean + agg.half_width)


def test_aggregate_five_runs():
    # df=4 quantile frozen from an independent numeric integration
    runs = [0.61, 0.64, 0.59, 0.66, 0.60]
    agg = aggregate(runs)
    mean = sum(runs) / 5
    var = sum((x - mean) ** 2 for x in runs) / 4
    expect = 2.7764451051977987 * math.sqrt(var / 5)
    assert agg.mean == pytest.approx(mean)
    assert agg.half_width == pytest.approx(expect, rel=1e-9)


def test_aggregate_zero_variance():
    agg = aggregate([0.5, 0.5, 0.5])
    assert agg.mean == 0.5
    assert agg.half_width == 0.0


def test_aggregate_order_invariant():
    runs = [0.3, 0.9, 0.6, 0.4]
    a = aggregate(runs)
    b = aggregate(list(reversed(runs)))
    assert a.mean == pytest.approx(b.mean)
    assert a.half_width == pytest.approx(b.half_width)


def test_aggregate_needs_two_runs():
    with pytest.raises(AggregationError):
        aggregate([0.5])
    with pytest.raises(AggregationError):
        aggregate([])


def test_aggregate_confidence_level():
    # wider confidence, wider interval
    runs = [0.2, 0.4, 0.6]
    assert (
        aggregate(runs, confidence=0.99).half_width
        > aggregate(runs, confidence=0.95).half_width
        > aggregate(runs, confidence=0.5).half_width
    )
