"""Tokenize/Encode/Decode over the unified id space: static vocabulary V in
[0, |V|) and phrase ids [|V|, |V|+m).

Segmentation is greedy left-to-right longest match over phrase surfaces,
aligned to token boundaries. Greedy matching is deterministic, linear-time,
and can only shorten a sequence, so the mixed length L' never exceeds the
static token length L, and decode(encode(X, P)) == X for in-vocabulary X.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .text_base import StaticVocab, decode_static, encode_static, normalize_text

TOKEN = "token"
PHRASE = "phrase"


@dataclass(frozen=True)
class Phrase:
    """One dynamic-vocabulary entry: a surface and its static subword ids."""

    surface: str
    subword_ids: tuple[int, ...]

    @property
    def s(self) -> int:
        return len(self.subword_ids)


@dataclass(frozen=True)
class Segment:
    surface: str
    kind: str  # TOKEN or PHRASE


class PhraseTable:
    """The per-batch dynamic vocabulary P, with global ids offset by |V|.

    Surfaces are unique; phrase j answers to global id ``offset + j``.
    Construction drops candidates that cannot be represented exactly
    (surfaces containing out-of-vocabulary words would decode to <unk>) and
    candidates shorter than ``min_phrase_tokens`` tokens.
    """

    def __init__(self, phrases: tuple[Phrase, ...], offset: int):
        surfaces = [p.surface for p in phrases]
        if len(set(surfaces)) != len(surfaces):
            raise ValueError("phrase surfaces must be unique")
        if any(p.s == 0 for p in phrases):
            raise ValueError("phrases must have nonempty subword ids")
        self.phrases = phrases
        self.offset = offset
        self._id_by_surface = {p.surface: offset + j for j, p in enumerate(phrases)}

    @staticmethod
    def build(surfaces: list[str], vocab: StaticVocab, min_phrase_tokens: int = 2) -> "PhraseTable":
        phrases: list[Phrase] = []
        seen: set[str] = set()
        for raw in surfaces:
            surface = normalize_text(raw)
            if surface in seen:
                continue
            ids = tuple(encode_static(surface, vocab))
            if len(ids) < min_phrase_tokens:
                continue
            if decode_static(list(ids), vocab) != surface:
                continue  # contains OOV words; not exactly representable
            seen.add(surface)
            phrases.append(Phrase(surface, ids))
        return PhraseTable(tuple(phrases), offset=len(vocab))

    @property
    def m(self) -> int:
        return len(self.phrases)

    def __len__(self) -> int:
        return len(self.phrases)

    def global_id(self, surface: str) -> int | None:
        return self._id_by_surface.get(surface)

    def surface_of(self, global_id: int) -> str:
        return self.phrases[global_id - self.offset].surface

    @property
    def surfaces(self) -> tuple[str, ...]:
        return tuple(p.surface for p in self.phrases)


@dataclass(frozen=True)
class MixedSequence:
    """Ids over V∪P plus the character span each id covers in the source."""

    ids: tuple[int, ...]
    spans: tuple[tuple[int, int], ...]

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def length(self) -> int:
        return len(self.ids)


def _word_spans(text: str) -> list[tuple[str, int, int]]:
    """Each word with its (start, end) character range in ``text``."""
    out = []
    pos = 0
    for word in text.split():
        start = text.index(word, pos)
        end = start + len(word)
        out.append((word, start, end))
        pos = end
    return out


def tokenize(text: str, table: PhraseTable, vocab: StaticVocab) -> list[Segment]:
    """Split text into phrase and token segments.

    At each token position the longest matching phrase surface wins; between
    equal-length matches the lowest phrase id wins (surfaces are unique, so
    this tie only arises from table construction order). Unmatched positions
    become single-token segments.
    """
    if table.offset != len(vocab):
        raise ValueError("phrase table offset must equal the vocabulary size")
    words = [w for w, _, _ in _word_spans(text)]
    match_map: dict[tuple[str, ...], int] = {}
    lengths: set[int] = set()
    for j, phrase in enumerate(table.phrases):
        key = tuple(phrase.surface.split())
        lengths.add(len(key))
        if key not in match_map:  # first (= lowest id) wins
            match_map[key] = j
    lengths_desc = sorted(lengths, reverse=True)

    segments: list[Segment] = []
    i = 0
    while i < len(words):
        matched = False
        for length in lengths_desc:
            if i + length > len(words):
                continue
            key = tuple(words[i : i + length])
            if key in match_map:
                segments.append(Segment(" ".join(key), PHRASE))
                i += length
                matched = True
                break
        if not matched:
            segments.append(Segment(words[i], TOKEN))
            i += 1
    return segments


def encode(text: str, table: PhraseTable, vocab: StaticVocab) -> MixedSequence:
    """Encode text to mixed ids: token segments to vocab ids, phrase
    segments to their global phrase ids."""
    spans_by_word = _word_spans(text)
    segments = tokenize(text, table, vocab)
    ids: list[int] = []
    spans: list[tuple[int, int]] = []
    w = 0
    for seg in segments:
        n_words = len(seg.surface.split())
        start = spans_by_word[w][1]
        end = spans_by_word[w + n_words - 1][2]
        if seg.kind == PHRASE:
            gid = table.global_id(seg.surface)
            assert gid is not None
            ids.append(gid)
        else:
            ids.append(vocab.id_of(seg.surface))
        spans.append((start, end))
        w += n_words
    return MixedSequence(tuple(ids), tuple(spans))


def decode(ids: list[int] | tuple[int, ...], table: PhraseTable, vocab: StaticVocab) -> str:
    """Inverse of encode: surfaces of tokens and phrases, space-joined."""
    return " ".join(seg.surface for seg in decode_segments(ids, table, vocab))


def decode_segments(ids: list[int] | tuple[int, ...], table: PhraseTable,
                    vocab: StaticVocab) -> list[Segment]:
    """Per-id segments; id < |V| means token, otherwise phrase."""
    limit = len(vocab) + table.m
    segments: list[Segment] = []
    for i in ids:
        if not 0 <= i < limit:
            raise ValueError(f"id {i} outside the unified space [0, {limit})")
        if i < len(vocab):
            segments.append(Segment(vocab.entries[i], TOKEN))
        else:
            segments.append(Segment(table.surface_of(i), PHRASE))
    return segments


def to_debug_json(seq: MixedSequence, table: PhraseTable, vocab: StaticVocab) -> str:
    """One json-lines record of a segmentation, for eyeballing pipelines."""
    segments = decode_segments(seq.ids, table, vocab)
    return json.dumps({
        "ids": list(seq.ids),
        "segments": [{"text": s.surface, "kind": s.kind} for s in segments],
    }, ensure_ascii=False)
