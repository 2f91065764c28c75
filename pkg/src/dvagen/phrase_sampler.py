"""Candidate phrase extraction: n-token windows, n-word windows, and
forward-maximum-matching against a reference corpus.

All samplers emit phrase *surfaces* (whitespace-joined words) drawn verbatim
from their input text, deduplicated by surface with first occurrence kept,
and never shorter than ``min_phrase_tokens`` tokens: a one-token "phrase"
would be indistinguishable from a plain token and only bloat the dynamic
vocabulary.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .text_base import DocumentSet, StaticVocab, decode_static

STRATEGIES = ("ntoken", "nword", "fmm")

Seed = int | Sequence[int] | None


@dataclass(frozen=True)
class SamplerConfig:
    strategy: str = "ntoken"
    n: int = 4
    max_phrases: int = 16
    min_phrase_tokens: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES and self.strategy not in _REGISTRY:
            raise ValueError(f"unknown sampler strategy {self.strategy!r}, expected one of {STRATEGIES}")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.max_phrases < 0:
            raise ValueError("max_phrases must be >= 0")
        if self.min_phrase_tokens < 2:
            raise ValueError("min_phrase_tokens must be >= 2")


class CorpusIndex:
    """Exact membership over every contiguous token span of a corpus.

    Spans are compared at the token level (after static encoding), so a hit
    always aligns with token boundaries. Immutable once built.
    """

    def __init__(self, spans: frozenset[tuple[int, ...]], max_span_len: int,
                 vocab: StaticVocab, corpus_fingerprint: str):
        self._spans = spans
        self.max_span_len = max_span_len
        self.vocab = vocab
        self.corpus_fingerprint = corpus_fingerprint

    def contains(self, span: tuple[int, ...]) -> bool:
        return span in self._spans

    def contains_text(self, text: str) -> bool:
        return self.contains(tuple(self.vocab.id_of(w) for w in text.split()))


def build_corpus_index(corpus: DocumentSet, vocab: StaticVocab) -> CorpusIndex:
    """Index all contiguous token spans of every corpus sentence."""
    if len(corpus) == 0:
        raise ValueError("cannot index an empty corpus")
    spans: set[tuple[int, ...]] = set()
    max_len = 0
    for _, text in corpus.documents:
        ids = tuple(vocab.id_of(w) for w in text.split())
        max_len = max(max_len, len(ids))
        for a in range(len(ids)):
            for b in range(a + 1, len(ids) + 1):
                spans.add(ids[a:b])
    digest = hashlib.sha256()
    digest.update(vocab.fingerprint.encode())
    for _, text in corpus.documents:
        digest.update(text.encode("utf-8"))
        digest.update(b"\x00")
    return CorpusIndex(frozenset(spans), max_len, vocab, digest.hexdigest())


def _sample_windows(surfaces: list[str], config: SamplerConfig, seed: Seed) -> list[str]:
    """Seeded draw of window surfaces without replacement, dedup by surface."""
    if config.max_phrases == 0 or not surfaces:
        return []
    rng = np.random.default_rng(config.seed if seed is None else seed)
    out: list[str] = []
    seen: set[str] = set()
    for pos in rng.permutation(len(surfaces)):
        surface = surfaces[pos]
        if surface in seen:
            continue
        seen.add(surface)
        out.append(surface)
        if len(out) >= config.max_phrases:
            break
    return out


def sample_ntoken(token_ids: list[int], config: SamplerConfig, vocab: StaticVocab,
                  seed: Seed = None) -> list[str]:
    """Sample n-token windows of an encoded text, returned as surfaces."""
    if config.n < config.min_phrase_tokens:
        return []
    windows = [
        decode_static(list(token_ids[i : i + config.n]), vocab)
        for i in range(len(token_ids) - config.n + 1)
    ]
    return _sample_windows(windows, config, seed)


def sample_nword(text: str, config: SamplerConfig, seed: Seed = None) -> list[str]:
    """Sample n-word windows of a text. A word is one whitespace token, so
    the min_phrase_tokens floor applies to n directly."""
    if config.n < config.min_phrase_tokens:
        return []
    words = text.split()
    windows = [" ".join(words[i : i + config.n]) for i in range(len(words) - config.n + 1)]
    return _sample_windows(windows, config, seed)


def sample_fmm(text: str, index: CorpusIndex, config: SamplerConfig) -> list[str]:
    """Forward maximum matching: at each position emit the longest span that
    occurs in the reference corpus and jump past it.

    Positions whose longest corpus match is shorter than min_phrase_tokens
    advance by one and emit nothing. Deterministic; the config seed is unused.
    """
    if config.max_phrases == 0:
        return []
    words = text.split()
    ids = [index.vocab.id_of(w) for w in words]
    out: list[str] = []
    seen: set[str] = set()
    i = 0
    while i < len(words):
        best = 0
        # Spans longer than anything indexed cannot match.
        for m in range(min(len(words) - i, index.max_span_len), 0, -1):
            if index.contains(tuple(ids[i : i + m])):
                best = m
                break
        if best >= config.min_phrase_tokens:
            surface = " ".join(words[i : i + best])
            if surface not in seen:
                seen.add(surface)
                out.append(surface)
                if len(out) >= config.max_phrases:
                    break
            i += best
        else:
            i += 1
    return out


# A sampler, once configured, is just text -> phrase surfaces. Custom
# strategies plug in under a new name; the configuration file selects one
# by its strategy string.
SamplerFn = Callable[[str], list[str]]
SamplerFactory = Callable[..., SamplerFn]

_REGISTRY: dict[str, SamplerFactory] = {}


def register_sampler(name: str, factory: SamplerFactory) -> None:
    _REGISTRY[name] = factory


def make_sampler(config: SamplerConfig, *, vocab: StaticVocab | None = None,
                 index: CorpusIndex | None = None) -> SamplerFn:
    """Instantiate the configured strategy as a text -> surfaces callable.

    ``seed`` may be overridden per call via the keyword argument on the
    returned function, so one configured sampler can serve many documents
    deterministically.
    """
    if config.strategy not in _REGISTRY:
        raise ValueError(f"no sampler registered under {config.strategy!r}")
    return _REGISTRY[config.strategy](config, vocab=vocab, index=index)


def _ntoken_factory(config: SamplerConfig, *, vocab=None, index=None) -> SamplerFn:
    if vocab is None:
        raise ValueError("ntoken sampler needs a vocabulary")

    def sampler(text: str, seed: Seed = None) -> list[str]:
        ids = [vocab.id_of(w) for w in text.split()]
        return sample_ntoken(ids, config, vocab, seed=seed)

    return sampler


def _nword_factory(config: SamplerConfig, *, vocab=None, index=None) -> SamplerFn:
    def sampler(text: str, seed: Seed = None) -> list[str]:
        return sample_nword(text, config, seed=seed)

    return sampler


def _fmm_factory(config: SamplerConfig, *, vocab=None, index=None) -> SamplerFn:
    if index is None:
        raise ValueError("fmm sampler needs a corpus index")

    def sampler(text: str, seed: Seed = None) -> list[str]:
        return sample_fmm(text, index, config)

    return sampler


register_sampler("ntoken", _ntoken_factory)
register_sampler("nword", _nword_factory)
register_sampler("fmm", _fmm_factory)
