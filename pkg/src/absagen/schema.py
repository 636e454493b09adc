"""Core value types for generative aspect-based sentiment analysis.

Two representation spaces exist side by side. Dataset space is what corpora
store: aspect "NULL" for implicit targets, categories like "FOOD#QUALITY",
polarity labels positive/negative/neutral. Generation space is what a model
reads and writes: natural-language phrases ("it", "food quality", "great").
SchemaConfig pins the mapping between the two and the marker strings used to
linearize tuples.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import ConfigError, ParseError, SchemaError

_WS_RUN = re.compile(r"\s+")


def collapse_ws(text: str) -> str:
    """Trim and collapse internal whitespace runs to single spaces."""
    return _WS_RUN.sub(" ", text.strip())


class Element(enum.Enum):
    """Tuple elements, in fixed priority order: aspect before category before
    polarity. Task definitions and marker ordering both rely on this order."""

    ASPECT = "aspect"
    CATEGORY = "category"
    POLARITY = "polarity"


class Polarity(enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    NEUTRAL = "neutral"

    @classmethod
    def from_dataset(cls, label: str) -> "Polarity":
        try:
            return cls(label.strip().lower())
        except ValueError:
            raise SchemaError(f"unknown polarity label: {label!r}") from None


@dataclass(frozen=True)
class Category:
    """A dataset category and its generation-space phrase.

    raw must be uppercase with exactly one '#'; the phrase is derived by
    lowercasing and replacing '#' with a space, which keeps raw -> phrase
    bijective across any category inventory.
    """

    raw: str
    phrase: str

    @classmethod
    def from_raw(cls, raw: str) -> "Category":
        raw = raw.strip()
        if raw != raw.upper() or raw.count("#") != 1:
            raise SchemaError(
                f"category {raw!r} must be uppercase ENTITY#ATTRIBUTE"
            )
        return cls(raw=raw, phrase=raw.lower().replace("#", " "))


@dataclass(frozen=True)
class AspectTerm:
    """An aspect target. surface is whitespace-normalized at construction;
    comparisons are case-sensitive. Null aspects carry the canonical dataset
    surface "NULL"."""

    surface: str
    is_null: bool = False

    def __post_init__(self):
        object.__setattr__(self, "surface", collapse_ws(self.surface))
        if self.is_null:
            object.__setattr__(self, "surface", "NULL")

    @classmethod
    def from_dataset(cls, surface: str) -> "AspectTerm":
        surface = collapse_ws(surface)
        return cls(surface=surface, is_null=surface == "NULL")

    def to_dataset(self) -> str:
        return "NULL" if self.is_null else self.surface

    @classmethod
    def null(cls) -> "AspectTerm":
        return cls(surface="NULL", is_null=True)


@dataclass(frozen=True)
class SentimentTuple:
    """One opinion. category / polarity are None when the task omits them."""

    aspect: AspectTerm
    category: Category | None = None
    polarity: Polarity | None = None

    def restricted(self, task: "Task") -> "SentimentTuple":
        """Project onto the task's element subset."""
        keep = task.elements
        return SentimentTuple(
            aspect=self.aspect,
            category=self.category if Element.CATEGORY in keep else None,
            polarity=self.polarity if Element.POLARITY in keep else None,
        )


class Task(enum.Enum):
    """Tuple-prediction tasks; elements always appear in priority order."""

    E2E_ABSA = ("e2e", (Element.ASPECT, Element.POLARITY))
    ACTE = ("acte", (Element.ASPECT, Element.CATEGORY))
    TASD = ("tasd", (Element.ASPECT, Element.CATEGORY, Element.POLARITY))

    def __init__(self, key: str, elements: tuple):
        self.key = key
        self.elements = elements

    @property
    def final_element(self) -> Element:
        return self.elements[-1]

    @classmethod
    def from_key(cls, key: str) -> "Task":
        key = key.strip().lower().replace("-absa", "").replace("_absa", "")
        for task in cls:
            if task.key == key:
                return task
        raise ConfigError(f"unknown task: {key!r} (choose e2e, acte or tasd)")


_DEFAULT_MARKERS = {
    Element.ASPECT: "[A]",
    Element.CATEGORY: "[C]",
    Element.POLARITY: "[P]",
}
_DEFAULT_POLARITY_PHRASES = {
    Polarity.POSITIVE: "great",
    Polarity.NEGATIVE: "bad",
    Polarity.NEUTRAL: "ok",
}


@dataclass(frozen=True)
class SchemaConfig:
    """Markers, separator and phrase maps for one experiment.

    Validation happens eagerly: phrase collisions anywhere across the
    polarity map, category map and null phrase would make parsing ambiguous,
    so construction fails on any duplicate.
    """

    categories: tuple[Category, ...]
    markers: Mapping[Element, str] = field(
        default_factory=lambda: dict(_DEFAULT_MARKERS)
    )
    separator: str = "[;]"
    null_phrase: str = "it"
    polarity_phrases: Mapping[Polarity, str] = field(
        default_factory=lambda: dict(_DEFAULT_POLARITY_PHRASES)
    )

    def __post_init__(self):
        if not self.categories:
            raise SchemaError("schema needs at least one category")
        raws = [c.raw for c in self.categories]
        if len(set(raws)) != len(raws):
            raise SchemaError("duplicate category raw forms")
        markers = [self.markers[e] for e in Element] + [self.separator]
        if len(set(markers)) != len(markers):
            raise SchemaError("markers and separator must be pairwise distinct")
        for m in markers:
            if not (m.startswith("[") and m.endswith("]") and len(m) > 2):
                raise SchemaError(f"marker {m!r} must look like [X]")
        phrases = (
            [self.null_phrase]
            + [self.polarity_phrases[p] for p in Polarity]
            + [c.phrase for c in self.categories]
        )
        if len(set(phrases)) != len(phrases):
            raise SchemaError(
                "null/polarity/category phrases collide; parsing would be "
                "ambiguous"
            )

    @classmethod
    def from_category_names(cls, names: Iterable[str], **kw) -> "SchemaConfig":
        cats = tuple(Category.from_raw(n) for n in names)
        return cls(categories=cats, **kw)

    @cached_property
    def category_by_phrase(self) -> dict[str, Category]:
        return {c.phrase: c for c in self.categories}

    @cached_property
    def category_by_raw(self) -> dict[str, Category]:
        return {c.raw: c for c in self.categories}

    @cached_property
    def polarity_by_phrase(self) -> dict[str, Polarity]:
        return {v: k for k, v in self.polarity_phrases.items()}

    def marker_letter(self, element: Element) -> str:
        return self.markers[element][1:-1]

    @property
    def separator_letter(self) -> str:
        return self.separator[1:-1]

    def category(self, raw: str) -> Category:
        try:
            return self.category_by_raw[raw]
        except KeyError:
            raise SchemaError(f"category {raw!r} not in schema") from None


def to_generation_space(
    t: SentimentTuple, cfg: SchemaConfig, task: Task
) -> tuple[str, ...]:
    """Map a tuple to its phrase sequence in task element order.

    The tuple must carry every element the task needs; the aspect map never
    fails (null -> cfg.null_phrase, anything else passes through).
    """
    out: list[str] = []
    for el in task.elements:
        if el is Element.ASPECT:
            out.append(cfg.null_phrase if t.aspect.is_null else t.aspect.surface)
        elif el is Element.CATEGORY:
            if t.category is None:
                raise SchemaError(f"tuple lacks a category, required by {task.key}")
            if t.category.raw not in cfg.category_by_raw:
                raise SchemaError(f"category {t.category.raw!r} not in schema")
            out.append(t.category.phrase)
        else:
            if t.polarity is None:
                raise SchemaError(f"tuple lacks a polarity, required by {task.key}")
            out.append(cfg.polarity_phrases[t.polarity])
    return tuple(out)


def from_generation_space(
    phrases: Sequence[str], cfg: SchemaConfig, task: Task
) -> SentimentTuple:
    """Inverse of to_generation_space. Unknown category or polarity phrases
    raise ParseError carrying the offending phrase."""
    if len(phrases) != len(task.elements):
        raise ParseError(
            f"expected {len(task.elements)} phrases for {task.key}, "
            f"got {len(phrases)}",
            phrase=" / ".join(phrases),
            kind="arity",
        )
    aspect = AspectTerm.null()
    category = None
    polarity = None
    for el, phrase in zip(task.elements, phrases):
        phrase = collapse_ws(phrase)
        if el is Element.ASPECT:
            if phrase != cfg.null_phrase:
                aspect = AspectTerm(surface=phrase)
        elif el is Element.CATEGORY:
            category = cfg.category_by_phrase.get(phrase)
            if category is None:
                raise ParseError(
                    f"unknown category phrase {phrase!r}",
                    phrase=phrase,
                    kind="category",
                )
        else:
            polarity = cfg.polarity_by_phrase.get(phrase)
            if polarity is None:
                raise ParseError(
                    f"unknown polarity phrase {phrase!r}",
                    phrase=phrase,
                    kind="polarity",
                )
    return SentimentTuple(aspect=aspect, category=category, polarity=polarity)


# ── schema config files (key=value) ──────────────────────────────────────

def save_schema_config(cfg: SchemaConfig, path: str | Path) -> None:
    lines = [
        "# absagen schema config",
        f"marker.aspect={cfg.markers[Element.ASPECT]}",
        f"marker.category={cfg.markers[Element.CATEGORY]}",
        f"marker.polarity={cfg.markers[Element.POLARITY]}",
        f"separator={cfg.separator}",
        f"null_phrase={cfg.null_phrase}",
        f"polarity.positive={cfg.polarity_phrases[Polarity.POSITIVE]}",
        f"polarity.negative={cfg.polarity_phrases[Polarity.NEGATIVE]}",
        f"polarity.neutral={cfg.polarity_phrases[Polarity.NEUTRAL]}",
        "categories=" + ",".join(c.raw for c in cfg.categories),
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_schema_config(path: str | Path) -> SchemaConfig:
    """Parse the key=value schema file. Unknown keys are errors so typos do
    not silently fall back to defaults."""
    markers = dict(_DEFAULT_MARKERS)
    pol = dict(_DEFAULT_POLARITY_PHRASES)
    separator = "[;]"
    null_phrase = "it"
    categories: list[str] = []
    known_pol = {p.value: p for p in Polarity}
    known_marker = {e.value: e for e in Element}
    for lineno, line in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key == "separator":
            separator = value
        elif key == "null_phrase":
            null_phrase = value
        elif key == "categories":
            categories = [v.strip() for v in value.split(",") if v.strip()]
        elif key.startswith("marker."):
            el = known_marker.get(key.removeprefix("marker."))
            if el is None:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            markers[el] = value
        elif key.startswith("polarity."):
            p = known_pol.get(key.removeprefix("polarity."))
            if p is None:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            pol[p] = value
        else:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
    if not categories:
        raise ConfigError(f"{path}: missing categories=")
    return SchemaConfig.from_category_names(
        categories,
        markers=markers,
        separator=separator,
        null_phrase=null_phrase,
        polarity_phrases=pol,
    )
