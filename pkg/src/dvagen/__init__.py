"""Dynamic-vocabulary text generation: a small transformer whose output
space is extended per input with retrieved phrase candidates, each emitted
as one id."""

from .autodiff import Tensor, no_grad
from .config import AppConfig, apply_overrides, load_config
from .dva_model import (
    DVAModel,
    ModelConfig,
    load_checkpoint,
    save_checkpoint,
)
from .dva_tokenizer import MixedSequence, PhraseTable, decode, encode, tokenize
from .eval_bench import (
    GenerationSetup,
    MetricsReport,
    ThroughputRow,
    benchmark_throughput,
    build_report,
    bytes_per_token,
    diversity,
    nsl,
    perplexity,
    profile_inference,
    rep_n,
    rouge_l,
)
from .inference_engine import (
    CandidateMask,
    GenerationConfig,
    GenerationSession,
    GenStep,
    build_phrase_candidates,
    generate_batch,
    generate_single,
    process_logits,
    serialize_session,
)
from .phrase_sampler import SamplerConfig, build_corpus_index, make_sampler
from .retriever import (
    RetrievalIndex,
    build_index,
    embed_document,
    load_index,
    retrieve,
    save_index,
)
from .text_base import (
    DocumentSet,
    StaticVocab,
    load_corpus,
    load_vocab,
    save_vocab,
    train_static_vocab,
)
from .trainer import TrainConfig, Trainer, assemble_batch, gradient_check

__version__ = "0.1.0"

__all__ = [
    "AppConfig",
    "CandidateMask",
    "DocumentSet",
    "DVAModel",
    "GenerationConfig",
    "GenerationSession",
    "GenerationSetup",
    "GenStep",
    "MetricsReport",
    "MixedSequence",
    "ModelConfig",
    "PhraseTable",
    "RetrievalIndex",
    "SamplerConfig",
    "StaticVocab",
    "Tensor",
    "ThroughputRow",
    "TrainConfig",
    "Trainer",
    "apply_overrides",
    "assemble_batch",
    "benchmark_throughput",
    "build_corpus_index",
    "build_index",
    "build_phrase_candidates",
    "build_report",
    "bytes_per_token",
    "decode",
    "diversity",
    "embed_document",
    "encode",
    "generate_batch",
    "generate_single",
    "gradient_check",
    "load_checkpoint",
    "load_config",
    "load_corpus",
    "load_index",
    "load_vocab",
    "make_sampler",
    "no_grad",
    "nsl",
    "perplexity",
    "process_logits",
    "profile_inference",
    "rep_n",
    "retrieve",
    "rouge_l",
    "save_checkpoint",
    "save_index",
    "save_vocab",
    "serialize_session",
    "tokenize",
    "train_static_vocab",
    "__version__",
]
