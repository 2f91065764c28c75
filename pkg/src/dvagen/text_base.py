"""Corpus ingestion and the static word-level vocabulary.

The static vocabulary is the fixed id space [0, |V|) that every other layer
builds on: phrase ids are appended after it, so its ordering must be exactly
reproducible from the same corpus. Tokenization is whitespace splitting over
pre-normalized text (runs of whitespace collapsed at ingestion), which makes
encode/decode an exact round trip for in-vocabulary text.
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

UNK, BOS, EOS, PAD = "<unk>", "<bos>", "<eos>", "<pad>"
RESERVED = (UNK, BOS, EOS, PAD)

VOCAB_MAGIC = "dva-vocab v1"


class CorpusError(ValueError):
    """Raised for unreadable or malformed corpus input."""


def normalize_text(text: str) -> str:
    """Collapse runs of whitespace to single spaces and strip the ends."""
    return " ".join(text.split())


@dataclass(frozen=True)
class DocumentSet:
    """An ordered corpus of (doc_id, text) pairs with dense ids from 0."""

    documents: tuple[tuple[int, str], ...]
    source_path: str = ""

    def __len__(self) -> int:
        return len(self.documents)

    @property
    def texts(self) -> tuple[str, ...]:
        return tuple(text for _, text in self.documents)

    @staticmethod
    def from_texts(texts: list[str], source_path: str = "") -> "DocumentSet":
        docs = tuple((i, normalize_text(t)) for i, t in enumerate(texts))
        return DocumentSet(documents=docs, source_path=source_path)


def load_corpus(path: str | Path, format: str = "plain-lines") -> DocumentSet:
    """Read a corpus file into a DocumentSet, one document per line/record.

    ``plain-lines``: each nonblank line is a document. ``json-lines``: each
    nonblank line is a JSON object with a required string "text" field.
    Document texts are whitespace-normalized here so downstream round trips
    are exact.
    """
    path = Path(path)
    if format not in ("plain-lines", "json-lines"):
        raise CorpusError(f"unknown corpus format: {format!r}")
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"cannot read corpus file {path}: {exc}") from exc

    texts: list[str] = []
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        if format == "plain-lines":
            texts.append(line)
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"{path}:{lineno}: invalid JSON record: {exc}") from exc
        if not isinstance(record, dict) or "text" not in record:
            raise CorpusError(f"{path}:{lineno}: record is missing a \"text\" field")
        if not isinstance(record["text"], str):
            raise CorpusError(f"{path}:{lineno}: \"text\" field must be a string")
        texts.append(record["text"])
    return DocumentSet.from_texts(texts, source_path=str(path))


@dataclass(frozen=True)
class StaticVocab:
    """The fixed vocabulary V: dense surface<->id mapping plus reserved ids.

    Ids 0..3 are ``<unk>``, ``<bos>``, ``<eos>``, ``<pad>``; word entries
    follow in frequency order (ties by first corpus occurrence).
    """

    entries: tuple[str, ...]
    id_map: dict[str, int] = field(repr=False)

    def __post_init__(self):
        if self.entries[: len(RESERVED)] != RESERVED:
            raise ValueError("vocabulary must start with the reserved surfaces")
        if len(self.id_map) != len(self.entries):
            raise ValueError("duplicate surfaces in vocabulary")

    @staticmethod
    def from_entries(entries: list[str] | tuple[str, ...]) -> "StaticVocab":
        entries = tuple(entries)
        return StaticVocab(entries=entries, id_map={s: i for i, s in enumerate(entries)})

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def size(self) -> int:
        return len(self.entries)

    @property
    def unk_id(self) -> int:
        return 0

    @property
    def bos_id(self) -> int:
        return 1

    @property
    def eos_id(self) -> int:
        return 2

    @property
    def pad_id(self) -> int:
        return 3

    def id_of(self, surface: str) -> int:
        """Id for a surface, falling back to unk_id."""
        return self.id_map.get(surface, self.unk_id)

    @property
    def fingerprint(self) -> str:
        return hashlib.sha256("\n".join(self.entries).encode("utf-8")).hexdigest()


def train_static_vocab(corpus: DocumentSet, target_size: int) -> StaticVocab:
    """Build a word-level vocabulary of at most ``target_size`` entries.

    The four reserved ids come first; the remaining slots hold the most
    frequent whitespace-delimited words, ties broken by first occurrence.
    """
    if len(corpus) == 0:
        raise CorpusError("cannot train a vocabulary on an empty corpus")
    if target_size < len(RESERVED):
        raise ValueError(
            f"target_size must be >= {len(RESERVED)} to fit the reserved ids, got {target_size}"
        )
    counts: Counter[str] = Counter()
    first_seen: dict[str, int] = {}
    position = 0
    for _, text in corpus.documents:
        for word in text.split():
            counts[word] += 1
            if word not in first_seen:
                first_seen[word] = position
            position += 1
    words = [w for w in counts if w not in RESERVED]
    words.sort(key=lambda w: (-counts[w], first_seen[w]))
    kept = words[: target_size - len(RESERVED)]
    return StaticVocab.from_entries(list(RESERVED) + kept)


def encode_static(text: str, vocab: StaticVocab) -> list[int]:
    """Map whitespace-split words to ids; out-of-vocabulary words become unk.

    No bos/eos markers are inserted; callers own sequence framing.
    """
    return [vocab.id_of(word) for word in text.split()]


def decode_static(ids: list[int], vocab: StaticVocab) -> str:
    """Inverse of encode_static for in-vocabulary text: surfaces space-joined."""
    surfaces = []
    for i in ids:
        if not 0 <= i < len(vocab):
            raise ValueError(f"token id {i} out of range for vocabulary of size {len(vocab)}")
        surfaces.append(vocab.entries[i])
    return " ".join(surfaces)


def save_vocab(vocab: StaticVocab, path: str | Path) -> None:
    lines = [f"{VOCAB_MAGIC} {len(vocab)}"] + list(vocab.entries)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_vocab(path: str | Path) -> StaticVocab:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise CorpusError(f"{path}: empty vocabulary file")
    head = lines[0].rsplit(" ", 1)
    if len(head) != 2 or head[0] != VOCAB_MAGIC or not head[1].isdigit():
        raise CorpusError(f"{path}: bad vocabulary header {lines[0]!r}")
    size = int(head[1])
    entries = lines[1 : 1 + size]
    if len(entries) != size:
        raise CorpusError(f"{path}: header promises {size} entries, found {len(entries)}")
    return StaticVocab.from_entries(entries)
