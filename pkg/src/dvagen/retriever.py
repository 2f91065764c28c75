"""Exact dense retrieval: the backbone doubles as the embedder, documents are
mean-pooled final-layer hidden states, and search is a full cosine scan.

Desk-scale corpora make exact search both fast and testable, so there is no
approximate-NN structure here; the sequential-per-sample retrieval cost that
an approximate backend would amortize is measured by the benchmark harness
instead.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .dva_model import DVAModel
from .text_base import DocumentSet, encode_static, normalize_text

INDEX_MAGIC = "dva-index v1"


@dataclass(frozen=True)
class RetrievalIndex:
    """Unit-normalized document vectors, row-aligned with doc_ids."""

    doc_vectors: np.ndarray
    doc_ids: np.ndarray
    embedder_fingerprint: str

    def __post_init__(self):
        if self.doc_vectors.ndim != 2:
            raise ValueError("doc_vectors must be a matrix")
        if self.doc_vectors.shape[0] != self.doc_ids.shape[0]:
            raise ValueError("doc_vectors rows must align with doc_ids")
        if self.doc_vectors.shape[0]:
            norms = np.linalg.norm(self.doc_vectors.astype(np.float64), axis=1)
            if np.abs(norms - 1.0).max() > 1e-6:
                raise ValueError("doc_vectors rows must be unit-normalized")

    @property
    def size(self) -> int:
        return self.doc_vectors.shape[0]


def embed_document(text: str, model: DVAModel) -> np.ndarray:
    """Unit-normalized mean of the backbone's final hidden states over the
    text's token positions (the framing BOS is not part of the text, so it
    stays out of the pool)."""
    clean = normalize_text(text)
    if not clean:
        raise ValueError("cannot embed an empty text")
    ids = [model.vocab.bos_id, *encode_static(clean, model.vocab)]
    window = model.config.max_seq_len
    hidden = model.hidden(np.array([ids[:window]], dtype=np.int64))
    pooled = hidden[0, 1:].mean(axis=0)
    return pooled / np.linalg.norm(pooled)


def build_index(corpus: DocumentSet, model: DVAModel) -> RetrievalIndex:
    """One vector per document, stored at file precision so a save/load
    round-trip is byte-exact."""
    if len(corpus) == 0:
        raise ValueError("cannot index an empty corpus")
    vectors = np.stack([embed_document(text, model) for _, text in corpus.documents])
    doc_ids = np.array([doc_id for doc_id, _ in corpus.documents], dtype=np.int64)
    return RetrievalIndex(
        doc_vectors=vectors.astype("<f4"),
        doc_ids=doc_ids,
        embedder_fingerprint=model.fingerprint(),
    )


def retrieve(prefix: str, index: RetrievalIndex, model: DVAModel,
             k: int) -> list[tuple[int, float]]:
    """Top-k documents by cosine similarity, descending; ties go to the lower
    doc_id; k larger than the index returns everything."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if index.size == 0:
        raise ValueError("cannot retrieve from an empty index")
    if index.embedder_fingerprint != model.fingerprint():
        raise ValueError("index was built by a different embedder; rebuild it")
    query = embed_document(prefix, model)
    # Row-wise reduce, not gemv: identical rows must score bit-identically
    # or the doc_id tie-break below never fires.
    scores = (index.doc_vectors.astype(np.float64) * query).sum(axis=1)
    order = np.lexsort((index.doc_ids, -scores))[: min(k, index.size)]
    return [(int(index.doc_ids[i]), float(scores[i])) for i in order]


def save_index(index: RetrievalIndex, path) -> None:
    header = {
        "num_docs": index.size,
        "d": int(index.doc_vectors.shape[1]),
        "fingerprint": index.embedder_fingerprint,
    }
    with open(path, "wb") as fh:
        fh.write(INDEX_MAGIC.encode() + b"\n")
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(index.doc_vectors.astype("<f4").tobytes())
        fh.write(index.doc_ids.astype("<i8").tobytes())


def load_index(path) -> RetrievalIndex:
    with open(path, "rb") as fh:
        magic = fh.readline().rstrip(b"\n").decode()
        if magic != INDEX_MAGIC:
            raise ValueError(f"not a {INDEX_MAGIC} file: header reads {magic!r}")
        header = json.loads(fh.readline())
        n, d = header["num_docs"], header["d"]
        vec_bytes = fh.read(4 * n * d)
        id_bytes = fh.read(8 * n)
        if len(vec_bytes) != 4 * n * d or len(id_bytes) != 8 * n:
            raise ValueError("index file truncated")
    return RetrievalIndex(
        doc_vectors=np.frombuffer(vec_bytes, dtype="<f4").reshape(n, d).copy(),
        doc_ids=np.frombuffer(id_bytes, dtype="<i8").copy(),
        embedder_fingerprint=header["fingerprint"],
    )
