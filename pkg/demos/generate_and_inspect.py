"""
Generation with retrieved phrase candidates
===========================================

Each prefix retrieves its nearest corpus documents, phrases sampled from
those documents become extra output ids for this call, and every decoding
step records the head of its probability distribution. The session object
keeps enough to replay or steer any step later.
"""

import numpy as np

from dvagen import (
    DocumentSet,
    DVAModel,
    GenerationConfig,
    ModelConfig,
    SamplerConfig,
    build_corpus_index,
    build_index,
    generate_single,
    serialize_session,
    train_static_vocab,
)

TEXTS = [
    "the cat sat on the mat",
    "the dog slept by the door",
    "a bird sang in the tree at dawn",
    "the cat and the dog ran to the tree",
    "rain fell on the roof all night",
    "the bird flew over the mat and the door",
]

corpus = DocumentSet.from_texts(TEXTS)
vocab = train_static_vocab(corpus, target_size=64)
model = DVAModel(
    ModelConfig(vocab_size=vocab.size, d_model=16, n_layers=1, n_heads=2,
                pe_layers=1, pe_heads=2, max_seq_len=48, pe_max_seq_len=8),
    vocab, seed=11,
)

# retrieval index over the corpus, word-span index for phrase sampling
index = build_index(corpus, model)
corpus_index = build_corpus_index(corpus, vocab)

config = GenerationConfig(strategy="sample", temperature=0.9, seed=5,
                          min_new_ids=2, max_new_ids=8, k_docs=3,
                          candidate_cap=8)
sampler = SamplerConfig(strategy="fmm", max_phrases=4)

session = generate_single("the cat", model, config, sampler,
                          index=index, corpus=corpus, corpus_index=corpus_index)

payload = serialize_session(session, vocab)
sample = payload["samples"][0]
print("candidate phrases offered:", sample["candidates"])
print("generated:", sample["text"])

# one line per emitted id; phrase segments came from the dynamic half
for seg in sample["segments"]:
    print(f"  {seg['kind']:>6}  p={seg['probability']:.3f}  {seg['text']!r}")

# step 0 in detail: the recorded distribution head, probability-sorted
head = sample["steps"][0]["candidates"][:5]
print("step 0 top candidates:")
for cid, prob in head:
    surface = vocab.entries[cid] if cid < vocab.size else session.table.surface_of(cid)
    print(f"  id {cid:>3}  p={prob:.3f}  {surface!r}")

probs = [p for _, p in sample["steps"][0]["candidates"]]
assert probs == sorted(probs, reverse=True)
assert np.isclose(sum(probs), 1.0, atol=1e-6) or sum(probs) < 1.0
print("distribution head is sorted and sums to <= 1")

# rerunning with the same seed replays the identical session
again = generate_single("the cat", model, config, sampler,
                        index=index, corpus=corpus, corpus_index=corpus_index)
assert again.records[0].output_ids == session.records[0].output_ids
print("seeded rerun is id-identical")
