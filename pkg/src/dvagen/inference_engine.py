"""Batched generation over the expanded vocabulary.

Per prefix: retrieve supporting documents, sample candidate phrases from
them, merge everything into one batch-level phrase table, and decode in
lockstep with a per-sample mask so each sample can only emit its own
candidates. Prefixes themselves are encoded with static tokens only; phrase
ids appear in generated continuations, never in the prompt encoding, so a
sample's hidden states cannot depend on what the rest of the batch retrieved.

Sampling draws exactly one uniform per step per sample (inverse-CDF over the
filtered distribution). Replays that force a known prefix of choices consume
draws at forced steps too, so the continuation after a forced step sees the
same random stream it would have seen originally.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dva_model import (
    DVAModel,
    ExpandedEmbeddings,
    decode_step,
    encode_phrases_np,
    expand_embeddings,
    next_distribution,
    prefill,
)
from .dva_tokenizer import PhraseTable, Segment, decode_segments
from .phrase_sampler import CorpusIndex, SamplerConfig, make_sampler
from .retriever import RetrievalIndex, retrieve
from .text_base import DocumentSet, StaticVocab, encode_static, normalize_text

STRATEGIES = ("greedy", "sample")


@dataclass(frozen=True)
class GenerationConfig:
    strategy: str = "greedy"
    temperature: float = 1.0
    top_k: int = 0
    min_new_ids: int = 1
    max_new_ids: int = 32
    seed: int = 0
    k_docs: int = 4
    candidate_cap: int = 16
    top_record: int = 50

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if not 0 <= self.min_new_ids <= self.max_new_ids:
            raise ValueError("need 0 <= min_new_ids <= max_new_ids")
        if self.top_k < 0 or self.candidate_cap < 0 or self.k_docs < 0:
            raise ValueError("top_k, candidate_cap, k_docs must be >= 0")
        if self.top_record < 1:
            raise ValueError("top_record must be >= 1")


@dataclass(frozen=True)
class CandidateMask:
    """Which rows of the batch phrase table one sample may emit."""

    allowed: np.ndarray

    def __post_init__(self):
        if self.allowed.dtype != np.bool_ or self.allowed.ndim != 1:
            raise ValueError("mask must be a boolean vector")

    @property
    def m(self) -> int:
        return self.allowed.shape[0]


@dataclass(frozen=True)
class GenStep:
    """One decoding decision: the chosen id plus the head of the distribution
    it was drawn from, for inspection and steering."""

    chosen: int
    candidates: tuple[tuple[int, float], ...]

    def probability_of(self, target: int) -> float | None:
        for cid, prob in self.candidates:
            if cid == target:
                return prob
        return None


@dataclass
class SampleRecord:
    prefix: str
    output_ids: list[int]
    steps: list[GenStep]
    mask: CandidateMask
    candidate_surfaces: tuple[str, ...]


@dataclass
class GenerationSession:
    table: PhraseTable
    records: list[SampleRecord]
    config: GenerationConfig


def process_logits(logits: np.ndarray, mask: CandidateMask,
                   vocab_size: int) -> np.ndarray:
    """Set disallowed phrase logits to -inf; tokens and allowed phrases pass
    through untouched. Masked entries have exactly zero probability after any
    softmax."""
    if logits.shape[-1] != vocab_size + mask.m:
        raise ValueError(
            f"logits cover {logits.shape[-1]} ids, mask expects {vocab_size + mask.m}"
        )
    out = np.array(logits, dtype=np.float64, copy=True)
    out[..., vocab_size:][..., ~mask.allowed] = -np.inf
    return out


def build_phrase_candidates(prefix: str, docs: list[str],
                            sampler_config: SamplerConfig, cap: int, *,
                            vocab: StaticVocab | None = None,
                            index: CorpusIndex | None = None,
                            seed=None) -> list[str]:
    """Sample phrases from each retrieved document; dedup in sampling order,
    then truncate to cap."""
    sampler = make_sampler(sampler_config, vocab=vocab, index=index)
    if seed is None:
        base = [0]
    elif isinstance(seed, (list, tuple)):
        base = [int(s) for s in seed]
    else:
        base = [int(seed)]
    out: list[str] = []
    seen: set[str] = set()
    for i, doc in enumerate(docs):
        doc_seed = [*base, i]
        for surface in sampler(doc, seed=doc_seed):
            if surface in seen:
                continue
            seen.add(surface)
            out.append(surface)
            if len(out) >= cap:
                return out
    return out


def _mask_for(candidates: list[str], table: PhraseTable) -> CandidateMask:
    allowed = np.zeros(table.m, dtype=bool)
    for surface in candidates:
        gid = table.global_id(normalize_text(surface))
        if gid is not None:
            allowed[gid - table.offset] = True
    return CandidateMask(allowed)


def _topk_record(probs: np.ndarray, chosen: int, limit: int) -> tuple[tuple[int, float], ...]:
    """Top ids by probability, ties to the lower id. Suppressed ids carry
    exactly zero probability and are left out; the chosen id always stays."""
    keep = np.flatnonzero(probs > 0.0)
    order = keep[np.argsort(-probs[keep], kind="stable")][:limit]
    pairs = [(int(i), float(probs[i])) for i in order]
    if all(i != chosen for i, _ in pairs):
        del pairs[-1]  # the lowest entry makes room; chosen may rank below it
        entry = (chosen, float(probs[chosen]))
        spot = next((n for n, (_, p) in enumerate(pairs) if p < entry[1]), len(pairs))
        pairs.insert(spot, entry)
    return tuple(pairs)


def _choose(probs: np.ndarray, strategy: str, top_k: int,
            rng: np.random.Generator) -> int:
    """Greedy takes the argmax (ties to the lowest id). Sampling consumes one
    uniform and inverts the CDF of the (optionally top-k-truncated,
    renormalized) distribution."""
    if strategy == "greedy":
        return int(np.argmax(probs))
    u = rng.random()
    if top_k > 0:
        keep = np.argsort(-probs, kind="stable")[:top_k]
        pool = probs[keep] / probs[keep].sum()
        edges = np.cumsum(pool)
        return int(keep[min(np.searchsorted(edges, u, side="right"), len(keep) - 1)])
    edges = np.cumsum(probs)
    return int(min(np.searchsorted(edges, u, side="right"), probs.shape[0] - 1))


def generate_with_table(prefixes: list[str], table: PhraseTable,
                        masks: list[CandidateMask], model: DVAModel,
                        config: GenerationConfig, *,
                        candidate_surfaces: list[tuple[str, ...]] | None = None,
                        forced: list[tuple[int, ...]] | None = None,
                        rng_keys: list[list[int]] | None = None) -> GenerationSession:
    """The decode core: a prebuilt table and per-sample masks, left-padded
    prefixes, lockstep steps. `forced` pins each sample's first choices (for
    steering replays); `rng_keys` pins each sample's random stream."""
    vocab, mconf = model.vocab, model.config
    batch = len(prefixes)
    if batch == 0:
        raise ValueError("need at least one prefix")
    if len(masks) != batch:
        raise ValueError("one mask per prefix required")
    for mask in masks:
        if mask.m != table.m:
            raise ValueError("mask length must equal the phrase table size")

    prefix_rows = [[vocab.bos_id, *encode_static(normalize_text(p), vocab)]
                   for p in prefixes]
    window = mconf.max_seq_len
    for p, row in zip(prefixes, prefix_rows):
        if len(row) + config.max_new_ids > window:
            raise ValueError(
                f"prefix of {len(row)} ids + max_new_ids {config.max_new_ids} "
                f"exceeds the {window}-id window"
            )

    t0 = max(len(row) for row in prefix_rows)
    ids = np.full((batch, t0), vocab.pad_id, dtype=np.int64)
    real = np.zeros((batch, t0), dtype=bool)
    for j, row in enumerate(prefix_rows):
        ids[j, t0 - len(row):] = row
        real[j, t0 - len(row):] = True

    params = model.inference_params()
    ep = encode_phrases_np(params, mconf, table, vocab)
    exp = expand_embeddings(params["lm.tok_emb"], params["lm.out_emb"], ep)

    # Static bias: disallowed phrases, plus ids that are never emitted.
    width = exp.width
    base_bias = np.zeros((batch, width))
    for j, mask in enumerate(masks):
        base_bias[j] = process_logits(base_bias[j], mask, vocab.size)
    base_bias[:, vocab.bos_id] = -np.inf
    base_bias[:, vocab.pad_id] = -np.inf

    state = prefill(params, mconf, ids, real, exp, capacity=t0 + config.max_new_ids)
    rngs = [
        np.random.default_rng(rng_keys[j] if rng_keys else [config.seed, j])
        for j in range(batch)
    ]
    forced = forced or [() for _ in range(batch)]

    records = [
        SampleRecord(
            prefix=prefixes[j], output_ids=[], steps=[], mask=masks[j],
            candidate_surfaces=(candidate_surfaces[j] if candidate_surfaces
                                else tuple(s for s, ok in zip(table.surfaces,
                                                              masks[j].allowed) if ok)),
        )
        for j in range(batch)
    ]
    finished = [False] * batch
    next_pos = np.array([len(row) for row in prefix_rows], dtype=np.int64)
    h = state.h

    for step in range(config.max_new_ids):
        bias = base_bias.copy()
        for j in range(batch):
            if len(records[j].output_ids) < config.min_new_ids:
                bias[j, vocab.eos_id] = -np.inf
        probs = next_distribution(h, exp, config.temperature, bias=bias)

        chosen = np.full(batch, vocab.eos_id, dtype=np.int64)
        for j in range(batch):
            if finished[j]:
                continue
            if step < len(forced[j]):
                pick = int(forced[j][step])
                if pick == vocab.eos_id or not np.isfinite(bias[j, pick]):
                    raise ValueError(f"forced id {pick} is not emittable at step {step}")
                if config.strategy == "sample":
                    rngs[j].random()  # keep the stream aligned with the original run
            else:
                pick = _choose(probs[j], config.strategy, config.top_k, rngs[j])
            if pick == vocab.eos_id:
                finished[j] = True
                continue
            chosen[j] = pick
            records[j].output_ids.append(pick)
            records[j].steps.append(
                GenStep(chosen=pick,
                        candidates=_topk_record(probs[j], pick, config.top_record))
            )
        if all(finished) or step == config.max_new_ids - 1:
            break
        h = decode_step(params, mconf, chosen, next_pos, exp, state.cache)
        next_pos += 1

    return GenerationSession(table=table, records=records, config=config)


def generate_batch(prefixes: list[str], model: DVAModel, config: GenerationConfig,
                   sampler_config: SamplerConfig, *,
                   index: RetrievalIndex | None = None,
                   corpus: DocumentSet | None = None,
                   corpus_index: CorpusIndex | None = None) -> GenerationSession:
    """Retrieval -> per-sample candidates -> shared table + masks -> decode.

    Without an index (or with k_docs 0) generation is pure-token. The corpus
    provides retrieved documents' texts; it must accompany an index."""
    if not prefixes:
        raise ValueError("need at least one prefix")
    vocab = model.vocab
    per_sample: list[list[str]] = []
    for j, prefix in enumerate(prefixes):
        docs: list[str] = []
        if index is not None and config.k_docs > 0:
            if corpus is None:
                raise ValueError("an index needs its corpus for document texts")
            by_id = dict(corpus.documents)
            hits = retrieve(prefix, index, model, k=config.k_docs)
            docs = [by_id[doc_id] for doc_id, _ in hits]
        per_sample.append(
            build_phrase_candidates(prefix, docs, sampler_config,
                                    config.candidate_cap, vocab=vocab,
                                    index=corpus_index, seed=[config.seed, j])
        )
    union: list[str] = []
    seen: set[str] = set()
    for cands in per_sample:
        for surface in cands:
            if surface not in seen:
                seen.add(surface)
                union.append(surface)
    table = PhraseTable.build(union, vocab)
    masks = [_mask_for(cands, table) for cands in per_sample]
    surfaces = [tuple(s for s in cands
                      if table.global_id(normalize_text(s)) is not None)
                for cands in per_sample]
    return generate_with_table(prefixes, table, masks, model, config,
                               candidate_surfaces=surfaces)


def generate_single(prefix: str, model: DVAModel, config: GenerationConfig,
                    sampler_config: SamplerConfig, *,
                    explicit_phrases: list[str] | None = None,
                    index: RetrievalIndex | None = None,
                    corpus: DocumentSet | None = None,
                    corpus_index: CorpusIndex | None = None) -> GenerationSession:
    """Batch of one. Explicit phrases, when given, replace retrieval-derived
    candidates outright."""
    if explicit_phrases is None:
        return generate_batch([prefix], model, config, sampler_config,
                              index=index, corpus=corpus, corpus_index=corpus_index)
    cleaned: list[str] = []
    seen: set[str] = set()
    for surface in explicit_phrases:
        normalized = normalize_text(surface)
        if normalized and normalized not in seen:
            seen.add(normalized)
            cleaned.append(normalized)
    table = PhraseTable.build(cleaned, model.vocab)
    mask = CandidateMask(np.ones(table.m, dtype=bool))
    return generate_with_table([prefix], table, [mask], model, config)


def decoded_text(session: GenerationSession, sample: int, vocab: StaticVocab) -> str:
    from .dva_tokenizer import decode

    return decode(session.records[sample].output_ids, session.table, vocab)


def session_segments(session: GenerationSession, sample: int,
                     vocab: StaticVocab) -> list[Segment]:
    return decode_segments(session.records[sample].output_ids, session.table, vocab)


def serialize_session(session: GenerationSession, vocab: StaticVocab) -> dict:
    """The wire shape: ids, segments with per-step probabilities, and the
    per-step candidate head of each distribution."""
    samples = []
    for j, record in enumerate(session.records):
        segments = session_segments(session, j, vocab)
        samples.append({
            "prefix": record.prefix,
            "ids": list(record.output_ids),
            "text": decoded_text(session, j, vocab),
            "segments": [
                {"text": seg.surface, "kind": seg.kind,
                 "probability": step.probability_of(step.chosen)}
                for seg, step in zip(segments, record.steps)
            ],
            "steps": [
                {"chosen": step.chosen,
                 "candidates": [[cid, prob] for cid, prob in step.candidates]}
                for step in record.steps
            ],
            "candidates": list(record.candidate_surfaces),
        })
    return {
        "vocab_size": vocab.size,
        "phrases": list(session.table.surfaces),
        "samples": samples,
    }
