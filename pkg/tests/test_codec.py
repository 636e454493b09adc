from __future__ import annotations

import random

import pytest

from absagen import (
    AspectTerm,
    CodecError,
    Polarity,
    SentimentTuple,
    Task,
    build_input,
    build_target,
    parse_output,
    read_jsonl,
    tuple_from_record,
    tuple_to_record,
    write_jsonl,
)
from absagen.codec import (
    EMPTY_ELEMENT,
    MISSING_MARKER,
    TRAILING_GARBAGE,
    UNKNOWN_CATEGORY,
    UNKNOWN_POLARITY,
)
from conftest import ALL_TASKS, random_tuple_list


def _tuple(cfg, aspect, cat, pol):
    return SentimentTuple(
        aspect=AspectTerm(aspect) if aspect != "NULL" else AspectTerm.null(),
        category=cfg.category(cat) if cat else None,
        polarity=pol,
    )


def test_build_input_rendering(toy_cfg):
    seq = build_input("Tasty soup but pricey tea.", Task.TASD, toy_cfg)
    assert seq.rendered == "Tasty soup but pricey tea. | [A] [C] [P]"
    assert build_input("x", Task.E2E_ABSA, toy_cfg).rendered == "x | [A] [P]"
    assert build_input("x", Task.ACTE, toy_cfg).rendered == "x | [A] [C]"


def test_build_input_normalizes_and_rejects_empty(toy_cfg):
    assert build_input("  a   b ", Task.TASD, toy_cfg).sentence == "a b"
    with pytest.raises(CodecError):
        build_input("   ", Task.TASD, toy_cfg)


def test_build_target_single(toy_cfg):
    t = _tuple(toy_cfg, "soup", "FOOD#QUALITY", Polarity.POSITIVE)
    assert (
        build_target([t], Task.TASD, toy_cfg).rendered
        == "[A] soup [C] food quality [P] great"
    )


def test_build_target_e2e_pair(toy_cfg):
    # two-opinion sentence, category dropped for the task
    tuples = [
        _tuple(toy_cfg, "soup", "FOOD#QUALITY", Polarity.POSITIVE),
        _tuple(toy_cfg, "tea", "FOOD#PRICES", Polarity.NEGATIVE),
    ]
    assert (
        build_target(tuples, Task.E2E_ABSA, toy_cfg).rendered
        == "[A] soup [P] great [;] [A] tea [P] bad"
    )


def test_build_target_acte_drops_polarity(toy_cfg):
    tuples = [
        _tuple(toy_cfg, "soup", "FOOD#QUALITY", Polarity.POSITIVE),
        _tuple(toy_cfg, "tea", "FOOD#PRICES", Polarity.NEGATIVE),
    ]
    assert (
        build_target(tuples, Task.ACTE, toy_cfg).rendered
        == "[A] soup [C] food quality [;] [A] tea [C] food prices"
    )


def test_build_target_null_aspect(toy_cfg):
    t = _tuple(toy_cfg, "NULL", "SERVICE#GENERAL", Polarity.NEUTRAL)
    assert (
        build_target([t], Task.TASD, toy_cfg).rendered
        == "[A] it [C] service general [P] ok"
    )


def test_build_target_rejects_empty(toy_cfg):
    with pytest.raises(CodecError):
        build_target([], Task.TASD, toy_cfg)


def test_parse_output_exact_inverse(toy_cfg):
    text = "[A] soup [C] food quality [P] great"
    tuples, diags = parse_output(text, Task.TASD, toy_cfg)
    assert diags == []
    assert tuples == {
        _tuple(toy_cfg, "soup", "FOOD#QUALITY", Polarity.POSITIVE)
    }


def test_parse_output_whitespace_tolerant(toy_cfg):
    text = "   [A]   soup  [C]  food   quality [P] great   "
    tuples, diags = parse_output(text, Task.TASD, toy_cfg)
    assert diags == []
    assert len(tuples) == 1


def test_parse_output_out_of_order_markers(toy_cfg):
    text = "[A] soup [P] great [C] food quality"
    tuples, diags = parse_output(text, Task.TASD, toy_cfg)
    assert tuples == set()
    assert [d.kind for d in diags] == [MISSING_MARKER]


def test_parse_output_unknown_phrases(toy_cfg):
    tuples, diags = parse_output(
        "[A] soup [C] fod quality [P] great", Task.TASD, toy_cfg
    )
    assert tuples == set()
    assert [d.kind for d in diags] == [UNKNOWN_CATEGORY]

    tuples, diags = parse_output(
        "[A] soup [C] food quality [P] fine", Task.TASD, toy_cfg
    )
    assert tuples == set()
    assert [d.kind for d in diags] == [UNKNOWN_POLARITY]


def test_parse_output_salvages_around_garbage(toy_cfg):
    text = "Sure! Here you go: [A] soup [C] food quality [P] great"
    tuples, diags = parse_output(text, Task.TASD, toy_cfg)
    assert len(tuples) == 1
    assert [d.kind for d in diags] == [TRAILING_GARBAGE]


def test_parse_output_empty_element(toy_cfg):
    tuples, diags = parse_output(
        "[A] [C] food quality [P] great", Task.TASD, toy_cfg
    )
    assert tuples == set()
    assert [d.kind for d in diags] == [EMPTY_ELEMENT]


def test_parse_output_bad_block_does_not_poison_good_one(toy_cfg):
    text = (
        "[A] soup [C] fod quality [P] great [;] "
        "[A] tea [C] food prices [P] bad"
    )
    tuples, diags = parse_output(text, Task.TASD, toy_cfg)
    assert tuples == {_tuple(toy_cfg, "tea", "FOOD#PRICES", Polarity.NEGATIVE)}
    assert [d.kind for d in diags] == [UNKNOWN_CATEGORY]


def test_parse_output_duplicates_collapse(toy_cfg):
    text = "[A] soup [P] great [;] [A] soup [P] great"
    tuples, diags = parse_output(text, Task.E2E_ABSA, toy_cfg)
    assert diags == []
    assert len(tuples) == 1


def test_parse_output_free_text(toy_cfg):
    tuples, diags = parse_output("I cannot help with that.", Task.TASD, toy_cfg)
    assert tuples == set()
    assert all(d.kind == MISSING_MARKER for d in diags)


def test_parse_output_never_raises_on_junk(toy_cfg):
    rng = random.Random(3)
    alphabet = "[];APC| soupfoodgreat "
    for _ in range(200):
        junk = "".join(
            rng.choice(alphabet) for _ in range(rng.randint(0, 40))
        )
        tuples, diags = parse_output(junk, Task.TASD, toy_cfg)
        assert isinstance(tuples, set) and isinstance(diags, list)


def test_codec_round_trip_property(toy_cfg):
    rng = random.Random(11)
    for _ in range(500):
        for task in ALL_TASKS:
            tuples = random_tuple_list(rng, toy_cfg)
            target = build_target(tuples, task, toy_cfg)
            parsed, diags = parse_output(target.rendered, task, toy_cfg)
            assert diags == []
            assert parsed == {t.restricted(task) for t in tuples}


def test_tuple_record_round_trip(toy_cfg):
    t = _tuple(toy_cfg, "NULL", "FOOD#QUALITY", Polarity.NEGATIVE)
    rec = tuple_to_record(t)
    assert rec == {
        "aspect": "NULL",
        "category": "FOOD#QUALITY",
        "polarity": "negative",
    }
    assert tuple_from_record(rec) == t

    partial = tuple_to_record(t.restricted(Task.E2E_ABSA))
    assert "category" not in partial
    assert tuple_from_record(partial) == t.restricted(Task.E2E_ABSA)


def test_tuple_record_requires_aspect():
    with pytest.raises(CodecError):
        tuple_from_record({"category": "FOOD#QUALITY"})


def test_jsonl_round_trip(tmp_path):
    path = tmp_path / "out.jsonl"
    records = [{"id": "a", "n": 1}, {"id": "b", "n": 2}]
    assert write_jsonl(records, path) == 2
    assert list(read_jsonl(path)) == records
    assert not path.with_name(path.name + ".tmp").exists()


def test_jsonl_rejects_bad_line(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"ok": 1}\nnot json\n')
    with pytest.raises(CodecError, match="bad.jsonl:2"):
        list(read_jsonl(path))
