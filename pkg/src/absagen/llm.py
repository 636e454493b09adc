"""Prompted-baseline harness: prompt construction, an OpenAI-compatible
chat-completions client with retry, and lenient reply parsing.

The prompt instructs the model to answer in the same marker format the
codec renders, so one parser serves fine-tuned and prompted models alike.
The instruction wording is template text, replaceable per run.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass
from typing import Mapping, Sequence

import requests

from .codec import (
    UNSTRUCTURED_REPLY,
    Diagnostic,
    build_input,
    build_target,
    parse_output,
)
from .errors import (
    AuthError,
    ClientError,
    ClientTimeout,
    PromptError,
    ResponseFormatError,
    RetryExhausted,
)
from .schema import Element, SchemaConfig, SentimentTuple, Task

_ELEMENT_NOUN = {
    Element.ASPECT: "an aspect term",
    Element.CATEGORY: "an aspect category",
    Element.POLARITY: "a sentiment polarity",
}

DEFAULT_TEMPLATE = """\
Extract every opinion expressed in the given sentence as {tuple_description}.
Answer with one block per opinion, formatted exactly as:
{format_line}
Join multiple blocks with " {separator} ". If an opinion has no explicit \
aspect term in the sentence, use "{null_phrase}" as the aspect term.
{inventories}Answer with the blocks only, no explanations."""


def _render_instruction(task: Task, cfg: SchemaConfig, template: str) -> str:
    nouns = [_ELEMENT_NOUN[e] for e in task.elements]
    if len(nouns) > 2:
        description = ", ".join(nouns[:-1]) + " and " + nouns[-1]
    else:
        description = " and ".join(nouns)
    fmt_parts = []
    for el in task.elements:
        fmt_parts.append(f"{cfg.markers[el]} <{el.value}>")
    inventories = []
    if Element.CATEGORY in task.elements:
        inventories.append(
            "Allowed categories: "
            + ", ".join(c.phrase for c in cfg.categories)
            + "."
        )
    if Element.POLARITY in task.elements:
        inventories.append(
            "Allowed polarities: "
            + ", ".join(sorted(cfg.polarity_phrases.values()))
            + "."
        )
    inv = ("\n".join(inventories) + "\n") if inventories else ""
    return template.format(
        tuple_description=description,
        format_line=" ".join(fmt_parts),
        separator=cfg.separator,
        null_phrase=cfg.null_phrase,
        inventories=inv,
    )


@dataclass(frozen=True)
class PromptSpec:
    """What goes into a prompt besides the query sentence. Demonstrations
    are (sentence, tuples) pairs taken from the head of the training set."""

    task: Task
    language: str = "en"
    demonstrations: tuple[tuple[str, tuple[SentimentTuple, ...]], ...] = ()

    @property
    def shot_count(self) -> int:
        return len(self.demonstrations)


def demonstrations_from_head(
    sentences: Sequence, k: int, head_size: int = 10
) -> tuple[tuple[str, tuple[SentimentTuple, ...]], ...]:
    """First k (sentence, tuples) pairs from the first head_size training
    records. Asking for more than the head holds is an error, not a
    silent truncation."""
    head = list(sentences[:head_size])
    if k < 0:
        raise PromptError(f"negative shot count {k}")
    if k > len(head):
        raise PromptError(
            f"asked for {k} demonstrations but the training head has "
            f"only {len(head)}"
        )
    return tuple((s.text, tuple(s.tuples)) for s in head[:k])


def build_prompt(
    spec: PromptSpec,
    sentence: str,
    cfg: SchemaConfig,
    template: str = DEFAULT_TEMPLATE,
) -> str:
    """Instruction block, then demonstrations as Input/Output pairs, then
    the query. Deterministic; the zero-shot prompt is the same text minus
    the demonstration section."""
    parts = [_render_instruction(spec.task, cfg, template)]
    for demo_sentence, demo_tuples in spec.demonstrations:
        demo_in = build_input(demo_sentence, spec.task, cfg)
        demo_out = build_target(list(demo_tuples), spec.task, cfg)
        parts.append(f"Input: {demo_in.rendered}\nOutput: {demo_out.rendered}")
    query = build_input(sentence, spec.task, cfg)
    parts.append(f"Input: {query.rendered}\nOutput:")
    return "\n\n".join(parts)


@dataclass(frozen=True)
class ChatRequest:
    model: str
    messages: tuple[Mapping[str, str], ...]
    temperature: float = 0.0

    @classmethod
    def for_prompt(
        cls, prompt: str, model: str, temperature: float = 0.0
    ) -> "ChatRequest":
        return cls(
            model=model,
            messages=({"role": "user", "content": prompt},),
            temperature=temperature,
        )

    def to_payload(self) -> dict:
        return {
            "model": self.model,
            "messages": [dict(m) for m in self.messages],
            "temperature": self.temperature,
        }


@dataclass(frozen=True)
class ChatResponse:
    text: str
    prompt_tokens: int
    completion_tokens: int
    raw: dict


_CHAT_PATH = "/v1/chat/completions"


def resolve_endpoint(endpoint: str) -> str:
    if "/chat/completions" in endpoint:
        return endpoint
    return endpoint.rstrip("/") + _CHAT_PATH


def complete(
    req: ChatRequest,
    endpoint: str,
    api_key: str | None = None,
    timeout: float = 60.0,
    max_attempts: int = 5,
    backoff: float = 0.5,
) -> ChatResponse:
    """POST the request; retry with exponential backoff on 429/5xx up to
    max_attempts. Auth failures and timeouts raise immediately."""
    url = resolve_endpoint(endpoint)
    headers = {"Content-Type": "application/json"}
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    last_status: int | None = None
    for attempt in range(max_attempts):
        try:
            resp = requests.post(
                url, json=req.to_payload(), headers=headers, timeout=timeout
            )
        except requests.Timeout as err:
            raise ClientTimeout(f"request to {url} timed out") from err
        except requests.RequestException as err:
            raise ClientError(f"request to {url} failed: {err}") from err
        if resp.status_code in (401, 403):
            raise AuthError(f"endpoint rejected credentials ({resp.status_code})")
        if resp.status_code == 429 or 500 <= resp.status_code < 600:
            last_status = resp.status_code
            if attempt + 1 < max_attempts:
                time.sleep(backoff * (2**attempt))
                continue
            raise RetryExhausted(
                f"gave up after {max_attempts} attempts, last status "
                f"{last_status}",
                attempts=max_attempts,
                last_status=last_status,
            )
        if resp.status_code != 200:
            raise ClientError(f"unexpected status {resp.status_code}")
        try:
            data = resp.json()
            text = data["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as err:
            raise ResponseFormatError(
                f"malformed completion response: {err}"
            ) from err
        usage = data.get("usage") or {}
        return ChatResponse(
            text=text,
            prompt_tokens=int(usage.get("prompt_tokens", 0)),
            completion_tokens=int(usage.get("completion_tokens", 0)),
            raw=data,
        )
    raise RetryExhausted(
        "no attempts made", attempts=0, last_status=None
    )  # pragma: no cover - max_attempts >= 1 always enters the loop


_FENCE = re.compile(r"```[^\n]*\n(.*?)```", re.S)


def parse_reply(
    text: str, task: Task, cfg: SchemaConfig
) -> tuple[set[SentimentTuple], list[Diagnostic]]:
    """Lenient reply parsing: unwrap code fences, keep only marker-bearing
    lines, parse each through the codec and union the results. A reply with
    no structured content yields an empty set plus one diagnostic."""
    unwrapped = _FENCE.sub(lambda m: m.group(1), text)
    markers = [cfg.markers[e] for e in task.elements]
    lines = [
        line
        for line in unwrapped.splitlines()
        if any(m in line for m in markers)
    ]
    if not lines:
        return set(), [
            Diagnostic(
                UNSTRUCTURED_REPLY,
                "reply contains no marker-formatted lines",
                None,
            )
        ]
    tuples: set[SentimentTuple] = set()
    diags: list[Diagnostic] = []
    for line in lines:
        t, d = parse_output(line, task, cfg)
        tuples |= t
        diags.extend(d)
    return tuples, diags
