"""Constrained decoding inside a third-party generation loop.

The "model" here is a seeded random-logits stack that knows nothing
about sentiment tuples. Each step it produces a logits vector; the
bridge masks it; argmax over the masked vector picks the next token.
For contrast the same logits stream is decoded once more without the
mask, which yields token soup.

Run:  python3 examples/generation_loop.py --sentence "tasty soup"
"""

from __future__ import annotations

import argparse

import numpy as np

import absagen_bridge as bridge

CATEGORIES = ["FOOD#QUALITY", "FOOD#PRICES", "SERVICE#GENERAL"]

# the host tokenizer's inventory: eos first, then markers, schema
# phrases, and whatever the sentence needs
BASE_PIECES = [
    "</s>", "<unk>", "[", "]", "A", "C", "P", ";",
    "it", "food", "quality", "prices", "service", "general",
    "great", "bad", "ok",
]


def run(sentence: str, task: str, mode: str, seed: int, steps: int) -> None:
    pieces = BASE_PIECES + [
        w for w in sentence.split() if w not in BASE_PIECES
    ]
    eos = pieces.index("</s>")

    handle = bridge.open_session(
        task=task,
        categories=CATEGORIES,
        vocab=pieces,
        mode=mode,
        sentence=sentence,
    )
    try:
        ids, allow_eos = bridge.allowed_next(handle, [])
        print(f"sentence    : {sentence}")
        print(
            "first step  : "
            f"{[pieces[i] for i in ids]} eos={allow_eos}"
        )

        rng = np.random.default_rng(seed)
        prefix: list[int] = []
        finished = False
        while not finished and len(prefix) < steps:
            logits = rng.standard_normal(len(pieces))
            masked = bridge.mask_scores(handle, prefix, logits.tolist())
            token = int(np.argmax(masked))
            prefix, finished = bridge.advance(handle, prefix, token)
        flag = "finished" if finished else "step budget hit"
        print(f"masked      : {bridge.decode_text(handle, prefix)} ({flag})")

        # same seed, same logits stream, no mask: the model on its own
        rng = np.random.default_rng(seed)
        free: list[int] = []
        for _ in range(steps):
            token = int(np.argmax(rng.standard_normal(len(pieces))))
            if token == eos:
                break
            free.append(token)
        print(f"unmasked    : {bridge.decode_text(handle, free)}")
    finally:
        bridge.close(handle)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sentence", default="tasty soup")
    ap.add_argument("--task", default="tasd")
    ap.add_argument("--mode", default="trie", choices=["bag", "trie"])
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--steps", type=int, default=30)
    args = ap.parse_args(argv)
    run(args.sentence, args.task, args.mode, args.seed, args.steps)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
