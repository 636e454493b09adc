"""Command-line entry point: ingest, split, stats, build-data, decode,
eval, prompt, explain-constraints.

Exit codes: 0 success, 1 fatal error, 2 configuration error. Diagnostics go
to stderr as "diag:" lines; outputs are written atomically with a
.run.json provenance sidecar next to each one.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__
from .codec import (
    build_input,
    build_target,
    read_jsonl,
    tuple_from_record,
    tuple_to_record,
    write_jsonl,
)
from .constraints import ConstraintEngine, ConstraintMode
from .corpus import (
    LabeledSentence,
    compute_stats,
    ingest_xml,
    split_train_dev,
)
from .decoding import (
    DecodeResult,
    RandomScorer,
    RemoteScorer,
    ScriptedScorer,
    batch_decode,
)
from .errors import AbsagenError, ClientError, ConfigError, StateError
from .llm import (
    ChatRequest,
    DEFAULT_TEMPLATE,
    PromptSpec,
    build_prompt,
    complete,
    demonstrations_from_head,
    parse_reply,
)
from .metrics import score
from .schema import (
    SchemaConfig,
    Task,
    load_schema_config,
)
from .tokenization import FileVocabulary, WhitespaceVocabulary

_API_KEY_VARS = ("ABSAGEN_API_KEY", "OPENAI_API_KEY")

# demo schema for explain-constraints when no --schema is given
_DEMO_CATEGORIES = ("FOOD#QUALITY", "FOOD#PRICES", "SERVICE#GENERAL")
_DEMO_SENTENCE = "tasty soup but pricey tea"


@dataclass
class RunConfig:
    """Resolved settings for one subcommand run; serialized next to every
    output file for provenance."""

    subcommand: str
    task: str | None = None
    mode: str | None = None
    schema_path: str | None = None
    vocab_path: str | None = None
    seed: int | None = None
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    endpoint: str | None = None
    model: str | None = None
    extra: dict = field(default_factory=dict)
    version: str = __version__

    def to_dict(self) -> dict:
        return asdict(self)


def _fail_config(problems: list[str]) -> None:
    if problems:
        raise ConfigError(
            "invalid configuration:\n  - " + "\n  - ".join(problems)
        )


def _check_input(problems: list[str], label: str, path: str | None) -> None:
    if path is not None and not Path(path).is_file():
        problems.append(f"{label} file not found: {path}")


def _check_output(problems: list[str], label: str, path: str | None) -> None:
    if path is not None:
        parent = Path(path).resolve().parent
        if not parent.is_dir():
            problems.append(f"{label} directory does not exist: {parent}")


def _parse_task(problems: list[str], key: str) -> Task | None:
    try:
        return Task.from_key(key)
    except ConfigError as err:
        problems.append(str(err))
        return None


def _parse_mode(problems: list[str], key: str) -> ConstraintMode | None:
    try:
        return ConstraintMode(key)
    except ValueError:
        problems.append(f"unknown mode: {key!r} (choose bag or trie)")
        return None


def _write_sidecar(out_path: str | Path, cfg: RunConfig) -> None:
    side = Path(str(out_path) + ".run.json")
    tmp = side.with_name(side.name + ".tmp")
    tmp.write_text(
        json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    os.replace(tmp, side)


def _emit_diag(kind: str, message: str) -> None:
    print(f"diag: [{kind}] {message}", file=sys.stderr)


def _load_sentences(path: str | Path) -> list[LabeledSentence]:
    return [LabeledSentence.from_record(rec) for rec in read_jsonl(path)]


def _schema_for(
    schema_path: str | None, sentences: Sequence[LabeledSentence] = ()
) -> SchemaConfig:
    """Load the schema file, or derive the category inventory from the
    corpus when no file is given."""
    if schema_path:
        return load_schema_config(schema_path)
    raws = sorted(
        {
            t.category.raw
            for s in sentences
            for t in s.tuples
            if t.category is not None
        }
    )
    if not raws:
        raise ConfigError(
            "no --schema given and the corpus carries no categories to "
            "derive one from"
        )
    return SchemaConfig.from_category_names(raws)


def _vocab_for(
    vocab_path: str | None,
    cfg: SchemaConfig,
    texts: Iterable[str],
):
    if vocab_path:
        return FileVocabulary.load(vocab_path)
    return WhitespaceVocabulary.for_schema(cfg, texts)


def _prediction_record(
    sent: LabeledSentence, result: DecodeResult
) -> dict:
    rec = {
        "id": sent.id,
        "text": sent.text,
        "language": sent.language,
        "tuples": [tuple_to_record(t) for t in sorted(
            result.tuples, key=lambda t: (t.aspect.surface,
                                          t.category.raw if t.category else "",
                                          t.polarity.value if t.polarity else "")
        )],
    }
    if result.diagnostics:
        rec["diagnostics"] = [
            {"kind": d.kind, "message": d.message} for d in result.diagnostics
        ]
    if result.error:
        rec["error"] = result.error
    return rec


# ── subcommands ──────────────────────────────────────────────────────────

def cmd_ingest(args) -> int:
    problems: list[str] = []
    _check_input(problems, "--in", args.infile)
    _check_output(problems, "--out", args.out)
    _fail_config(problems)
    cfg = RunConfig(
        subcommand="ingest",
        inputs={"in": args.infile},
        outputs={"out": args.out},
        extra={"lang": args.lang, "keep_empty": args.keep_empty},
    )
    result = ingest_xml(args.infile, language=args.lang, keep_empty=args.keep_empty)
    for line in result.diagnostics:
        _emit_diag("ingest", line)
    write_jsonl((s.to_record() for s in result.sentences), args.out)
    _write_sidecar(args.out, cfg)
    print(
        f"ingested {len(result.sentences)} sentences "
        f"({result.dropped_empty} zero-opinion dropped) -> {args.out}"
    )
    return 0


def cmd_split(args) -> int:
    problems: list[str] = []
    _check_input(problems, "--in", args.infile)
    _check_output(problems, "--train", args.train)
    _check_output(problems, "--dev", args.dev)
    if not 0.0 < args.fraction < 1.0:
        problems.append(f"--fraction {args.fraction} not in (0, 1)")
    _fail_config(problems)
    cfg = RunConfig(
        subcommand="split",
        seed=args.seed,
        inputs={"in": args.infile},
        outputs={"train": args.train, "dev": args.dev},
        extra={"fraction": args.fraction},
    )
    sentences = _load_sentences(args.infile)
    train, dev = split_train_dev(sentences, args.fraction, args.seed)
    write_jsonl((s.to_record() for s in train), args.train)
    _write_sidecar(args.train, cfg)
    write_jsonl((s.to_record() for s in dev), args.dev)
    _write_sidecar(args.dev, cfg)
    print(f"split {len(sentences)} -> train {len(train)} / dev {len(dev)}")
    return 0


def cmd_stats(args) -> int:
    problems: list[str] = []
    _check_input(problems, "--in", args.infile)
    _fail_config(problems)
    dropped = None
    if args.infile.endswith(".xml"):
        result = ingest_xml(args.infile, language=args.lang)
        for line in result.diagnostics:
            _emit_diag("ingest", line)
        sentences = result.sentences
        dropped = result.dropped_empty
    else:
        sentences = _load_sentences(args.infile)
    stats = compute_stats(sentences)
    rows = stats.rows()
    if dropped is not None:
        rows.append(("zero-opinion dropped", dropped))
    if args.json:
        payload = {k.replace(" ", "_"): v for k, v in rows}
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        width = max(len(k) for k, _ in rows)
        for k, v in rows:
            print(f"{k:<{width}}  {v}")
    return 0


def cmd_build_data(args) -> int:
    problems: list[str] = []
    _check_input(problems, "--in", args.infile)
    _check_input(problems, "--schema", args.schema)
    _check_output(problems, "--out", args.out)
    task = _parse_task(problems, args.task)
    _fail_config(problems)
    sentences = _load_sentences(args.infile)
    cfg = _schema_for(args.schema, sentences)
    run = RunConfig(
        subcommand="build-data",
        task=task.key,
        schema_path=args.schema,
        inputs={"in": args.infile},
        outputs={"out": args.out},
    )
    records = []
    skipped = 0
    for s in sentences:
        if not s.tuples:
            _emit_diag("build-data", f"sentence {s.id}: no tuples, skipped")
            skipped += 1
            continue
        records.append(
            {
                "id": s.id,
                "input": build_input(s.text, task, cfg).rendered,
                "target": build_target(list(s.tuples), task, cfg).rendered,
            }
        )
    write_jsonl(records, args.out)
    _write_sidecar(args.out, run)
    print(f"built {len(records)} pairs ({skipped} skipped) -> {args.out}")
    return 0


def _make_scorer(spec: str, vocab, sentences, task, cfg):
    kind, _, arg = spec.partition(":")
    if kind == "random":
        seed = int(arg) if arg else 0
        return RandomScorer(vocab.size, seed), seed
    if kind == "scripted":
        if not Path(arg).is_file():
            raise ConfigError(f"scripted scorer file not found: {arg}")
        inputs_by_id = {
            s.id: build_input(s.text, task, cfg).rendered for s in sentences
        }
        return ScriptedScorer.from_file(arg, inputs_by_id, vocab), None
    if kind == "remote":
        if not arg:
            raise ConfigError("remote scorer needs a URL: remote:<url>")
        return RemoteScorer(arg, vocab.size), None
    raise ConfigError(
        f"unknown scorer spec {spec!r} "
        "(use random:<seed>, scripted:<file> or remote:<url>)"
    )


def cmd_decode(args) -> int:
    problems: list[str] = []
    _check_input(problems, "--in", args.infile)
    _check_input(problems, "--schema", args.schema)
    _check_input(problems, "--vocab", args.vocab)
    _check_output(problems, "--out", args.out)
    task = _parse_task(problems, args.task)
    mode = _parse_mode(problems, args.mode)
    if args.max_len < 1:
        problems.append(f"--max-len must be positive, got {args.max_len}")
    _fail_config(problems)
    sentences = _load_sentences(args.infile)
    cfg = _schema_for(args.schema, sentences)
    vocab = _vocab_for(args.vocab, cfg, (s.text for s in sentences))
    scorer, seed = _make_scorer(args.scorer, vocab, sentences, task, cfg)
    run = RunConfig(
        subcommand="decode",
        task=task.key,
        mode=mode.value,
        schema_path=args.schema,
        vocab_path=args.vocab,
        seed=seed,
        inputs={"in": args.infile},
        outputs={"out": args.out},
        extra={
            "scorer": args.scorer,
            "max_len": args.max_len,
            "masking": not args.no_mask,
        },
    )
    inputs = [build_input(s.text, task, cfg) for s in sentences]
    results = batch_decode(
        scorer,
        inputs,
        task,
        cfg,
        vocab,
        mode,
        max_len=args.max_len,
        masking=not args.no_mask,
        max_workers=args.workers,
    )
    errors = 0
    for s, r in zip(sentences, results):
        for d in r.diagnostics:
            _emit_diag(d.kind, f"sentence {s.id}: {d.message}")
        if r.error:
            errors += 1
            _emit_diag("decode-error", f"sentence {s.id}: {r.error}")
    write_jsonl(
        (_prediction_record(s, r) for s, r in zip(sentences, results)),
        args.out,
    )
    _write_sidecar(args.out, run)
    print(
        f"decoded {len(results)} sentences ({errors} errors) -> {args.out}"
    )
    return 0


def _tuples_by_id(path: str) -> tuple[dict, dict]:
    by_id: dict[str, set] = {}
    language: dict[str, str] = {}
    for rec in read_jsonl(path):
        sid = str(rec.get("id"))
        by_id[sid] = {tuple_from_record(t) for t in rec.get("tuples", [])}
        language[sid] = str(rec.get("language", ""))
    return by_id, language


def cmd_eval(args) -> int:
    problems: list[str] = []
    _check_input(problems, "--pred", args.pred)
    _check_input(problems, "--gold", args.gold)
    _check_output(problems, "--report", args.report)
    task = _parse_task(problems, args.task)
    _fail_config(problems)
    pred, _ = _tuples_by_id(args.pred)
    gold, lang = _tuples_by_id(args.gold)
    groups = lang if any(lang.values()) else None
    report = score(pred, gold, task, groups=groups)
    print(
        f"P={report.precision:.4f} R={report.recall:.4f} "
        f"F1={report.f1:.4f} (tp={report.tp}, pred={report.pred_count}, "
        f"gold={report.gold_count})"
    )
    if report.by_group:
        for key in sorted(report.by_group):
            sub = report.by_group[key]
            print(
                f"  {key}: P={sub.precision:.4f} R={sub.recall:.4f} "
                f"F1={sub.f1:.4f}"
            )
    if args.report:
        run = RunConfig(
            subcommand="eval",
            task=task.key,
            inputs={"pred": args.pred, "gold": args.gold},
            outputs={"report": args.report},
        )
        tmp = Path(args.report + ".tmp")
        tmp.write_text(
            json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        os.replace(tmp, args.report)
        _write_sidecar(args.report, run)
    return 0


def cmd_prompt(args) -> int:
    problems: list[str] = []
    _check_input(problems, "--in", args.infile)
    _check_input(problems, "--train", args.train)
    _check_input(problems, "--schema", args.schema)
    _check_input(problems, "--template", args.template)
    _check_output(problems, "--out", args.out)
    task = _parse_task(problems, args.task)
    if args.shots < 0:
        problems.append(f"--shots must be >= 0, got {args.shots}")
    if args.shots > 0 and not args.train:
        problems.append("--shots > 0 requires --train for demonstrations")
    if args.endpoint and not args.endpoint.startswith(("http://", "https://")):
        problems.append(f"--endpoint must be http(s), got {args.endpoint!r}")
    _fail_config(problems)
    queries = _load_sentences(args.infile)
    train = _load_sentences(args.train) if args.train else []
    cfg = _schema_for(args.schema, train or queries)
    template = (
        Path(args.template).read_text(encoding="utf-8")
        if args.template
        else DEFAULT_TEMPLATE
    )
    spec = PromptSpec(
        task=task,
        language=args.lang,
        demonstrations=demonstrations_from_head(train, args.shots),
    )
    run = RunConfig(
        subcommand="prompt",
        task=task.key,
        schema_path=args.schema,
        inputs={"in": args.infile, "train": args.train or ""},
        outputs={"out": args.out or ""},
        endpoint=args.endpoint,
        model=args.model,
        extra={"shots": args.shots, "lang": args.lang},
    )
    prompts = [(s, build_prompt(spec, s.text, cfg, template)) for s in queries]
    if not args.endpoint:
        records = [{"id": s.id, "prompt": p} for s, p in prompts]
        if args.out:
            write_jsonl(records, args.out)
            _write_sidecar(args.out, run)
            print(f"wrote {len(records)} prompts -> {args.out}")
        else:
            for rec in records:
                print(json.dumps(rec, ensure_ascii=False))
        return 0
    api_key = next(
        (os.environ[v] for v in _API_KEY_VARS if os.environ.get(v)), None
    )
    records = []
    failures = 0
    for s, prompt in prompts:
        req = ChatRequest.for_prompt(prompt, args.model, args.temperature)
        try:
            resp = complete(req, args.endpoint, api_key=api_key)
            tuples, diags = parse_reply(resp.text, task, cfg)
            result = DecodeResult(
                text=resp.text,
                tuples=frozenset(tuples),
                diagnostics=tuple(diags),
                finished=True,
            )
        except ClientError as err:
            failures += 1
            result = DecodeResult(error=str(err))
        for d in result.diagnostics:
            _emit_diag(d.kind, f"sentence {s.id}: {d.message}")
        if result.error:
            _emit_diag("client-error", f"sentence {s.id}: {result.error}")
        records.append(_prediction_record(s, result))
    out = args.out or "predictions.jsonl"
    write_jsonl(records, out)
    _write_sidecar(out, run)
    print(f"prompted {len(records)} sentences ({failures} failures) -> {out}")
    return 0


def cmd_explain(args) -> int:
    problems: list[str] = []
    _check_input(problems, "--schema", args.schema)
    _check_input(problems, "--vocab", args.vocab)
    task = _parse_task(problems, args.task)
    mode = _parse_mode(problems, args.mode)
    _fail_config(problems)
    if args.schema:
        cfg = load_schema_config(args.schema)
    else:
        cfg = SchemaConfig.from_category_names(_DEMO_CATEGORIES)
    vocab = _vocab_for(args.vocab, cfg, [args.sentence, args.prefix])
    engine = ConstraintEngine(task, cfg, vocab, mode, args.sentence)
    tokens = vocab.encode(args.prefix) if args.prefix.strip() else []
    try:
        state = engine.state_from_tokens(tokens)
        result = engine.explain(state)
    except StateError as err:
        print(f"prefix not reachable in {mode.value} mode: {err}", file=sys.stderr)
        return 1
    print(f"prefix:    {args.prefix!r}")
    print(f"sentence:  {args.sentence!r}")
    print(f"task/mode: {task.key}/{mode.value}")
    print(f"row:       {result.row}")
    print(f"pattern:   {result.pattern}")
    print(f"eos:       {'allowed' if result.allow_eos else 'masked'}")
    print("candidates:")
    for piece in result.candidates:
        print(f"  {piece}")
    return 0


# ── parser ───────────────────────────────────────────────────────────────

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="absagen",
        description=(
            "Schema-guided constrained decoding for generative "
            "aspect-based sentiment analysis"
        ),
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("ingest", help="SemEval ABSA XML -> JSONL")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--lang", default="en")
    p.add_argument("--keep-empty", action="store_true",
                   help="keep zero-opinion sentences (stats only)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("split", help="deterministic train/dev split")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--dev", required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--fraction", type=float, default=0.9,
                   help="train fraction (default 0.9)")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("stats", help="corpus statistics table")
    p.add_argument("--in", dest="infile", required=True,
                   help="XML or JSONL corpus")
    p.add_argument("--lang", default="en")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("build-data", help="render input/target text pairs")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--task", required=True)
    p.add_argument("--schema")
    p.set_defaults(func=cmd_build_data)

    p = sub.add_parser("decode", help="constrained greedy decoding")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--task", required=True)
    p.add_argument("--mode", default="trie", help="bag or trie")
    p.add_argument("--scorer", required=True,
                   help="random:<seed> | scripted:<file> | remote:<url>")
    p.add_argument("--schema")
    p.add_argument("--vocab", help="vocabulary file (one piece per line)")
    p.add_argument("--max-len", type=int, default=256)
    p.add_argument("--no-mask", action="store_true",
                   help="disable constraint masking (diagnostic)")
    p.add_argument("--workers", type=int, default=4)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("eval", help="exact-match micro-F1")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--task", required=True)
    p.add_argument("--report", help="write JSON report here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("prompt", help="prompted LLM baseline")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--task", required=True)
    p.add_argument("--train", help="training JSONL for demonstrations")
    p.add_argument("--shots", type=int, default=0)
    p.add_argument("--schema")
    p.add_argument("--template", help="instruction template file")
    p.add_argument("--endpoint", help="chat-completions base URL; "
                   "omit for a prompt dry run")
    p.add_argument("--model", default="gpt-4o-mini")
    p.add_argument("--temperature", type=float, default=0.0)
    p.add_argument("--lang", default="en")
    p.add_argument("--out")
    p.set_defaults(func=cmd_prompt)

    p = sub.add_parser(
        "explain-constraints",
        help="show the candidate-table row and tokens for a prefix",
    )
    p.add_argument("--prefix", required=True)
    p.add_argument("--sentence", default=_DEMO_SENTENCE)
    p.add_argument("--task", default="tasd")
    p.add_argument("--mode", default="bag")
    p.add_argument("--schema")
    p.add_argument("--vocab")
    p.set_defaults(func=cmd_explain)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except AbsagenError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
