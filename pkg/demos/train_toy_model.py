"""Train a toy dynamic-vocabulary model from scratch.

The full pipeline at desk scale: a tiny corpus, a static vocab trained
from it, a float64 transformer, and a frozen-backbone run where only the
phrase encoder and projector move. Ends with a checkpoint round trip.
"""

import tempfile
from pathlib import Path

from dvagen import (
    DocumentSet,
    DVAModel,
    ModelConfig,
    SamplerConfig,
    TrainConfig,
    Trainer,
    load_checkpoint,
    save_checkpoint,
    train_static_vocab,
)

TEXTS = [
    "the cat sat on the mat",
    "the dog slept by the door",
    "a bird sang in the tree",
    "the cat and the dog ran to the tree",
    "rain fell on the roof all night",
    "the bird flew over the mat",
]

corpus = DocumentSet.from_texts(TEXTS)
vocab = train_static_vocab(corpus, target_size=64)
model = DVAModel(
    ModelConfig(vocab_size=vocab.size, d_model=16, n_layers=1, n_heads=2,
                pe_layers=1, pe_heads=2, max_seq_len=48, pe_max_seq_len=8),
    vocab, seed=7,
)
print("model fingerprint:", model.fingerprint()[:12])

# frozen_backbone: lm.* stays put, pe.* and proj.* learn
config = TrainConfig(mode="frozen_backbone", steps=40, batch_size=4,
                     learning_rate=1e-3, seed=3,
                     sampler=SamplerConfig(strategy="nword", n=2, max_phrases=4))
trainer = Trainer(model, config)
losses = trainer.run(list(corpus.texts))

print(f"first loss {losses[0]:.4f} -> last loss {losses[-1]:.4f}")
assert losses[-1] < losses[0]

# the checkpoint keeps the vocab fingerprint, so a reload is verifiable
with tempfile.TemporaryDirectory() as workdir:
    path = Path(workdir) / "toy.ckpt"
    save_checkpoint(model, path)
    again = load_checkpoint(path, vocab)
    assert again.fingerprint() == model.fingerprint()
    print("checkpoint round trip ok:", path.name)
