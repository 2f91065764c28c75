"""Drive the steering API without a network socket.

The FastAPI app is plain ASGI, so the in-process test client exercises the
real routes headlessly: generate a session, list the alternatives the model
saw at one position, force a different choice there, and fetch the
heat-colored SVG for the new session.
"""

import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from dvagen import (
    DocumentSet,
    DVAModel,
    GenerationConfig,
    ModelConfig,
    SamplerConfig,
    build_corpus_index,
    build_index,
    train_static_vocab,
)
from dvagen.service import ServiceContext, create_app

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

context = ServiceContext(
    model=model,
    sampler=SamplerConfig(strategy="nword", n=2, max_phrases=8),
    generation=GenerationConfig(strategy="sample", temperature=0.9, seed=21,
                                min_new_ids=3, max_new_ids=8, k_docs=3,
                                candidate_cap=8),
    index=build_index(corpus, model),
    corpus=corpus,
    corpus_index=build_corpus_index(corpus, vocab),
)
client = TestClient(create_app(context))

health = client.get("/api/health").json()
print("health:", health["status"], "| vocab", health["model"]["vocab_size"],
      "| retrieval", health["retrieval"])

# a session is one generation call; phrases may extend the id space
generated = client.post("/api/generate", json={"prefix": "the cat"}).json()
session_id = generated["session_id"]
print("generated:", generated["text"])
print("phrase candidates in play:", generated["candidates"][:4], "...")

# alternatives recorded at position 1, most probable first
rows = client.get(f"/api/candidates?session_id={session_id}&position=1&limit=6").json()
print("position 1 candidates:")
for row in rows["candidates"]:
    print(f"  id {row['id']:>3}  p={row['probability']:.3f}  [{row['kind']}] {row['text']!r}")

# pick the strongest alternative that is not what the model chose
chosen = generated["ids"][1]
alternative = next(r for r in rows["candidates"]
                   if r["id"] != chosen and r["id"] != vocab.eos_id)
steered = client.post("/api/steer", json={
    "session_id": session_id, "position": 1, "replacement_id": alternative["id"],
}).json()
print(f"forced {alternative['text']!r} at position 1 ->", steered["text"])
assert steered["parent_session_id"] == session_id
assert steered["ids"][:1] == generated["ids"][:1]  # pre-position ids survive

# the parent session is untouched; both stay addressable
again = client.get(f"/api/candidates?session_id={session_id}&position=1&limit=6").json()
assert again == rows

viz = client.get(f"/api/viz?session_id={steered['session_id']}").json()
out = Path(tempfile.mkdtemp()) / "session.svg"
out.write_text(viz["svg"])
print("wrote", out, f"({len(viz['svg'])} bytes, {len(viz['segments'])} segments)")

# errors come back as one structured shape
missing = client.get("/api/candidates?session_id=nope&position=0")
print("unknown session ->", missing.status_code, missing.json()["error"]["code"])
