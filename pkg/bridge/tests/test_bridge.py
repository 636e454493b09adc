import random
import subprocess
import sys
import threading
from pathlib import Path

import pytest

bridge = pytest.importorskip(
    "absagen_bridge",
    reason="bridge package not installed; primary suite stands alone",
)

from absagen import (
    ConstraintEngine,
    ConstraintMode,
    SchemaConfig,
    Task,
    WhitespaceVocabulary,
)
from absagen import mask_scores as native_mask_scores

CATEGORIES = ["FOOD#QUALITY", "FOOD#PRICES", "SERVICE#GENERAL"]
SENTENCE = "tasty soup"


@pytest.fixture(scope="module")
def vocab():
    cfg = SchemaConfig.from_category_names(CATEGORIES)
    return WhitespaceVocabulary.for_schema(cfg, [SENTENCE, "cold tea"])


@pytest.fixture(scope="module")
def pieces(vocab):
    return [vocab.id_to_piece(i) for i in range(vocab.size)]


@pytest.fixture
def session(pieces):
    handle = bridge.open_session(
        task="tasd",
        categories=CATEGORIES,
        vocab=pieces,
        mode="trie",
        sentence=SENTENCE,
    )
    yield handle
    try:
        bridge.close(handle)
    except bridge.SessionError:
        pass


# ── open/close lifecycle ─────────────────────────────────────────────────


def test_handles_are_distinct_ints(pieces):
    kw = dict(
        task="tasd",
        categories=CATEGORIES,
        vocab=pieces,
        mode="bag",
        sentence=SENTENCE,
    )
    h1 = bridge.open_session(**kw)
    h2 = bridge.open_session(**kw)
    try:
        assert isinstance(h1, int) and isinstance(h2, int)
        assert h1 != h2
    finally:
        bridge.close(h1)
        bridge.close(h2)


def test_closed_handle_errors_everywhere(pieces):
    handle = bridge.open_session(
        task="tasd",
        categories=CATEGORIES,
        vocab=pieces,
        mode="trie",
        sentence=SENTENCE,
    )
    bridge.close(handle)
    with pytest.raises(bridge.SessionError):
        bridge.allowed_next(handle, [])
    with pytest.raises(bridge.SessionError):
        bridge.advance(handle, [], 2)
    with pytest.raises(bridge.SessionError):
        bridge.mask_scores(handle, [], [0.0] * len(pieces))
    with pytest.raises(bridge.SessionError):
        bridge.decode_text(handle, [])
    with pytest.raises(bridge.SessionError):
        bridge.close(handle)


def test_unknown_handle_errors():
    with pytest.raises(bridge.SessionError):
        bridge.allowed_next(987654, [])


def test_open_session_config_errors(pieces):
    good = dict(
        task="tasd",
        categories=CATEGORIES,
        vocab=pieces,
        mode="trie",
        sentence=SENTENCE,
    )
    with pytest.raises(bridge.ConfigError):
        bridge.open_session(**{**good, "task": "xyz"})
    with pytest.raises(bridge.ConfigError):
        bridge.open_session(**{**good, "mode": "fast"})
    with pytest.raises(bridge.ConfigError):
        bridge.open_session(**{**good, "sentence": "   "})
    with pytest.raises(bridge.ConfigError):
        bridge.open_session(**{**good, "vocab": ["<unk>", "[", "]"]})


# ── candidate queries ────────────────────────────────────────────────────


def test_empty_prefix_offers_only_open(session, vocab, pieces):
    ids, allow_eos = bridge.allowed_next(session, [])
    assert ids == [pieces.index("[")]
    assert allow_eos is False


def test_polarity_marker_offers_polarity_words(session, vocab):
    prefix = vocab.encode("[A] soup [C] food quality [P]")
    ids, allow_eos = bridge.allowed_next(session, prefix)
    expected = {vocab.encode(w)[0] for w in ("great", "bad", "ok")}
    assert set(ids) == expected
    assert allow_eos is False


def test_eos_flag_mid_final_content(session, vocab):
    prefix = vocab.encode("[A] soup [C] food quality [P] great")
    ids, allow_eos = bridge.allowed_next(session, prefix)
    assert allow_eos is True


def test_results_are_sorted_primitives(session, vocab):
    ids, allow_eos = bridge.allowed_next(session, vocab.encode("[A]"))
    assert ids == sorted(ids)
    assert all(isinstance(i, int) for i in ids)
    assert isinstance(allow_eos, bool)


# ── range and type policing ──────────────────────────────────────────────


def test_out_of_range_ids_raise(session):
    with pytest.raises(bridge.VocabularyError):
        bridge.allowed_next(session, [9999])
    with pytest.raises(bridge.VocabularyError):
        bridge.advance(session, [], 9999)
    with pytest.raises(bridge.VocabularyError):
        bridge.advance(session, [], -1)
    with pytest.raises(bridge.VocabularyError):
        bridge.decode_text(session, [9999])


def test_non_integer_token_raises(session):
    with pytest.raises(bridge.VocabularyError):
        bridge.advance(session, [], 2.5)


# ── advance ──────────────────────────────────────────────────────────────


def test_advance_walks_a_full_target(session, vocab):
    target = vocab.encode("[A] soup [C] food quality [P] great")
    prefix: list[int] = []
    for tok in target:
        prefix, finished = bridge.advance(session, prefix, tok)
        assert finished is False
    assert prefix == target
    done, finished = bridge.advance(session, prefix, vocab.eos_id)
    # eos flips the flag without entering the prefix
    assert done == target
    assert finished is True


def test_advance_rejects_disallowed_token(session, pieces):
    with pytest.raises(bridge.ConstraintViolation) as exc:
        bridge.advance(session, [], pieces.index("]"))
    assert exc.value.token_id == pieces.index("]")
    assert exc.value.row == "start"


def test_trie_rejects_unreachable_prefix(session, pieces):
    with pytest.raises(bridge.StateError):
        bridge.allowed_next(session, [pieces.index("]")])


def test_bag_tolerates_junk_prefix(pieces):
    handle = bridge.open_session(
        task="tasd",
        categories=CATEGORIES,
        vocab=pieces,
        mode="bag",
        sentence=SENTENCE,
    )
    try:
        ids, allow_eos = bridge.allowed_next(handle, [pieces.index("]")])
        assert isinstance(ids, list)
    finally:
        bridge.close(handle)


# ── mask_scores and decode_text ──────────────────────────────────────────


def test_mask_scores_matches_native(session, vocab, pieces):
    cfg = SchemaConfig.from_category_names(CATEGORIES)
    engine = ConstraintEngine(
        Task.TASD, cfg, vocab, ConstraintMode.TRIE, SENTENCE
    )
    rng = random.Random(5)
    prefix = vocab.encode("[A] soup [C]")
    scores = [rng.uniform(-3, 3) for _ in range(len(pieces))]
    got = bridge.mask_scores(session, prefix, scores)
    state = engine.state_from_tokens(prefix)
    want = native_mask_scores(
        scores, engine.allowed_next(state), vocab.eos_id
    )
    assert got == list(want)
    assert any(x == float("-inf") for x in got)


def test_mask_scores_short_vector_raises(session):
    with pytest.raises(bridge.ShapeError):
        bridge.mask_scores(session, [], [0.0, 0.0])


def test_decode_text_round_trip(session, vocab):
    text = "[A] soup [C] food quality [P] great"
    assert bridge.decode_text(session, vocab.encode(text)) == text


# ── threading contract ───────────────────────────────────────────────────


def test_foreign_thread_is_rejected(session):
    errors: list[Exception] = []

    def use():
        try:
            bridge.allowed_next(session, [])
        except Exception as err:
            errors.append(err)

    t = threading.Thread(target=use)
    t.start()
    t.join()
    assert len(errors) == 1
    assert isinstance(errors[0], bridge.SessionError)


def test_one_session_per_thread_works(pieces):
    got: list[list[int]] = []

    def work():
        handle = bridge.open_session(
            task="tasd",
            categories=CATEGORIES,
            vocab=pieces,
            mode="trie",
            sentence=SENTENCE,
        )
        try:
            ids, _ = bridge.allowed_next(handle, [])
            got.append(ids)
        finally:
            bridge.close(handle)

    t = threading.Thread(target=work)
    t.start()
    t.join()
    assert got == [[pieces.index("[")]]


def test_sessions_are_independent(pieces, vocab):
    h1 = bridge.open_session(
        task="tasd",
        categories=CATEGORIES,
        vocab=pieces,
        mode="trie",
        sentence=SENTENCE,
    )
    h2 = bridge.open_session(
        task="tasd",
        categories=CATEGORIES,
        vocab=pieces,
        mode="trie",
        sentence="cold tea",
    )
    try:
        marker = vocab.encode("[A]")
        ids1, _ = bridge.allowed_next(h1, marker)
        ids2, _ = bridge.allowed_next(h2, marker)
        assert vocab.encode("tasty")[0] in ids1
        assert vocab.encode("cold")[0] in ids2
        assert set(ids1) != set(ids2)
    finally:
        bridge.close(h1)
        bridge.close(h2)


# ── differential against the native engine ───────────────────────────────


def _grow_random_prefix(engine, rng, max_steps):
    state = engine.initial_state()
    prefix: list[int] = []
    for _ in range(rng.randint(0, max_steps)):
        cands = engine.allowed_next(state)
        choices = sorted(cands.ids)
        if not choices:
            break
        tok = rng.choice(choices)
        state = engine.advance(state, tok)
        prefix.append(tok)
    return state, prefix


@pytest.mark.parametrize(
    "mode,rounds", [(ConstraintMode.TRIE, 1000), (ConstraintMode.BAG, 300)]
)
def test_allowed_next_differential(vocab, pieces, mode, rounds):
    cfg = SchemaConfig.from_category_names(CATEGORIES)
    engine = ConstraintEngine(Task.TASD, cfg, vocab, mode, SENTENCE)
    handle = bridge.open_session(
        task="tasd",
        categories=CATEGORIES,
        vocab=pieces,
        mode=mode.value,
        sentence=SENTENCE,
    )
    try:
        rng = random.Random(4097)
        for _ in range(rounds):
            state, prefix = _grow_random_prefix(engine, rng, 30)
            native = engine.allowed_next(state)
            got_ids, got_eos = bridge.allowed_next(handle, prefix)
            assert got_ids == sorted(native.ids)
            assert got_eos is native.allow_eos
    finally:
        bridge.close(handle)


def test_advance_differential(vocab, pieces):
    cfg = SchemaConfig.from_category_names(CATEGORIES)
    engine = ConstraintEngine(
        Task.TASD, cfg, vocab, ConstraintMode.TRIE, SENTENCE
    )
    handle = bridge.open_session(
        task="tasd",
        categories=CATEGORIES,
        vocab=pieces,
        mode="trie",
        sentence=SENTENCE,
    )
    try:
        rng = random.Random(271)
        for _ in range(200):
            state, prefix = _grow_random_prefix(engine, rng, 20)
            cands = engine.allowed_next(state)
            pool = sorted(cands.ids) + (
                [vocab.eos_id] if cands.allow_eos else []
            )
            if not pool:
                continue
            tok = rng.choice(pool)
            native = engine.advance(state, tok)
            got_prefix, got_finished = bridge.advance(handle, prefix, tok)
            assert got_prefix == list(native.generated)
            assert got_finished is native.finished
    finally:
        bridge.close(handle)


# ── example script ───────────────────────────────────────────────────────


def test_example_script_runs_deterministically():
    script = (
        Path(__file__).resolve().parents[1] / "examples" / "generation_loop.py"
    )
    runs = []
    for _ in range(2):
        proc = subprocess.run(
            [sys.executable, str(script), "--seed", "11"],
            capture_output=True,
            text=True,
            timeout=120,
        )
        assert proc.returncode == 0, proc.stderr
        runs.append(proc.stdout)
    assert runs[0] == runs[1]
    assert "masked      : [A]" in runs[0]
    assert "unmasked    : " in runs[0]
