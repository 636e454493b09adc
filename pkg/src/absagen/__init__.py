"""Schema-guided constrained decoding for generative aspect-based
sentiment analysis."""

from __future__ import annotations

__version__ = "0.1.0"

from .codec import (
    Diagnostic,
    InputSequence,
    TargetSequence,
    build_input,
    build_target,
    parse_output,
    read_jsonl,
    tuple_from_record,
    tuple_to_record,
    write_jsonl,
)
from .constraints import (
    CandidateSet,
    ConstraintEngine,
    ConstraintMode,
    DecoderState,
    ExplainResult,
    mask_scores,
)
from .corpus import (
    CorpusStats,
    IngestResult,
    LabeledSentence,
    compute_stats,
    ingest_xml,
    split_train_dev,
)
from .decoding import (
    DecodeResult,
    RandomScorer,
    RemoteScorer,
    Scorer,
    ScriptedScorer,
    batch_decode,
    enumerate_language,
    greedy_decode,
)
from .errors import (
    AbsagenError,
    AggregationError,
    AuthError,
    ClientError,
    ClientTimeout,
    CodecError,
    ConfigError,
    ConstraintViolation,
    EvalError,
    IngestError,
    ParseError,
    PromptError,
    ResponseFormatError,
    RetryExhausted,
    SchemaError,
    ShapeError,
    SizeError,
    StateError,
    VocabularyError,
)
from .llm import (
    ChatRequest,
    ChatResponse,
    DEFAULT_TEMPLATE,
    PromptSpec,
    build_prompt,
    complete,
    demonstrations_from_head,
    parse_reply,
)
from .metrics import EvalReport, RunAggregate, aggregate, score
from .schema import (
    AspectTerm,
    Category,
    Element,
    Polarity,
    SchemaConfig,
    SentimentTuple,
    Task,
    from_generation_space,
    load_schema_config,
    save_schema_config,
    to_generation_space,
)
from .tokenization import (
    FileVocabulary,
    MarkerTokenMap,
    TokenTrie,
    Vocabulary,
    WhitespaceVocabulary,
    atomize,
    build_span_trie,
    build_trie,
    sentence_token_bag,
)
