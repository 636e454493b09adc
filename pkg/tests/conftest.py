from __future__ import annotations

import random

import pytest

from absagen import (
    AspectTerm,
    Polarity,
    SchemaConfig,
    SentimentTuple,
    Task,
    WhitespaceVocabulary,
)

TOY_CATEGORIES = ["FOOD#QUALITY", "FOOD#PRICES", "SERVICE#GENERAL"]
TOY_SENTENCE = "tasty soup"

WORDS = [
    "tasty", "soup", "pricey", "tea", "cold", "rice", "friendly", "staff",
    "bland", "beer", "warm", "bread",
]


@pytest.fixture
def toy_cfg() -> SchemaConfig:
    return SchemaConfig.from_category_names(TOY_CATEGORIES)


@pytest.fixture
def toy_vocab(toy_cfg) -> WhitespaceVocabulary:
    return WhitespaceVocabulary.for_schema(toy_cfg, [TOY_SENTENCE] + WORDS)


def random_tuple(rng: random.Random, cfg: SchemaConfig) -> SentimentTuple:
    if rng.random() < 0.2:
        aspect = AspectTerm.null()
    else:
        n = rng.randint(1, 2)
        aspect = AspectTerm(" ".join(rng.choice(WORDS) for _ in range(n)))
    return SentimentTuple(
        aspect=aspect,
        category=rng.choice(cfg.categories),
        polarity=rng.choice(list(Polarity)),
    )


def random_tuple_list(
    rng: random.Random, cfg: SchemaConfig, max_n: int = 4
) -> list[SentimentTuple]:
    return [random_tuple(rng, cfg) for _ in range(rng.randint(1, max_n))]


@pytest.fixture
def make_tuples(toy_cfg):
    def make(seed: int, max_n: int = 4) -> list[SentimentTuple]:
        return random_tuple_list(random.Random(seed), toy_cfg, max_n)

    return make


ALL_TASKS = [Task.TASD, Task.ACTE, Task.E2E_ABSA]
