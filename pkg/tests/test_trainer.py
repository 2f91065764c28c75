"""Batch assembly, loss oracles, the three training regimes, and the
finite-difference gradient check."""

from __future__ import annotations

import io
import json
import math

import numpy as np
import pytest

from dvagen.dva_model import DVAModel, ModelConfig
from dvagen.dva_tokenizer import PhraseTable
from dvagen.phrase_sampler import SamplerConfig
from dvagen.text_base import DocumentSet, train_static_vocab
from dvagen.trainer import (
    LORA_SCALE_KEY,
    TrainBatch,
    TrainConfig,
    Trainer,
    TrainingError,
    assemble_batch,
    batch_loss_t,
    compute_loss,
    gradient_check,
    merged_inference_params,
    trainable_names,
)
from dvagen import autodiff as ad

TEXTS = [
    "the cat sat on the mat",
    "the dog sat on the log",
    "a cat and a dog sat on the mat",
    "the mat was warm and the log was wet",
]

BIGRAMS = SamplerConfig(strategy="nword", n=2, max_phrases=32)


@pytest.fixture(scope="module")
def vocab():
    return train_static_vocab(DocumentSet.from_texts(TEXTS), target_size=32)


@pytest.fixture
def model(vocab):
    config = ModelConfig(vocab_size=vocab.size, d_model=16, n_layers=1, n_heads=2,
                         pe_layers=1, pe_heads=2, d_ff=32, max_seq_len=32,
                         pe_max_seq_len=8)
    return DVAModel(config, vocab, seed=1)


class TestAssembleBatch:
    def test_shared_phrase_uses_one_id(self, vocab):
        batch = assemble_batch(
            ["the cat sat on the mat", "the cat and a dog"], BIGRAMS, vocab, seed=0
        )
        gid = batch.table.global_id("the cat")
        assert sum(1 for s in batch.table.surfaces if s == "the cat") == 1
        assert all(seq.ids[0] == gid for seq in batch.sequences)

    def test_empty_sampler_gives_pure_tokens(self, vocab):
        no_phrases = SamplerConfig(strategy="ntoken", n=1, max_phrases=8)
        batch = assemble_batch(["the cat sat"], no_phrases, vocab, seed=0)
        assert batch.table.m == 0
        assert int(batch.input_ids.max()) < vocab.size

    def test_deterministic(self, vocab):
        a = assemble_batch(TEXTS, BIGRAMS, vocab, seed=9)
        b = assemble_batch(TEXTS, BIGRAMS, vocab, seed=9)
        assert np.array_equal(a.input_ids, b.input_ids)
        assert np.array_equal(a.target_ids, b.target_ids)
        assert a.table.surfaces == b.table.surfaces

    def test_framing_and_mask(self, vocab):
        batch = assemble_batch(["the cat sat", "a dog"], BIGRAMS, vocab, seed=0)
        assert (batch.input_ids[:, 0] == vocab.bos_id).all()
        for i, seq in enumerate(batch.sequences):
            true_len = len(seq.ids) + 2  # bos + ids + eos
            assert batch.target_mask[i].sum() == true_len - 1
            last = int(batch.target_mask[i].sum()) - 1
            assert batch.target_ids[i, last] == vocab.eos_id

    def test_targets_are_inputs_shifted(self, vocab):
        batch = assemble_batch(["the cat sat on the mat"], BIGRAMS, vocab, seed=0)
        assert np.array_equal(batch.input_ids[0, 1:], batch.target_ids[0, :-1])

    def test_truncation(self, vocab):
        batch = assemble_batch(["the cat sat on the mat"],
                               SamplerConfig(strategy="ntoken", n=1), vocab,
                               seed=0, max_len=4)
        assert batch.input_ids.shape[1] == 3

    def test_rejects_empty(self, vocab):
        with pytest.raises(ValueError):
            assemble_batch([], BIGRAMS, vocab, seed=0)


def make_batch(vocab, targets, width):
    targets = np.asarray(targets)
    return TrainBatch(
        input_ids=np.zeros_like(targets),
        target_ids=targets,
        target_mask=np.ones_like(targets, dtype=bool),
        table=PhraseTable.build([], vocab),
        sequences=(),
    )


class TestComputeLoss:
    def test_uniform_logits_give_log_classes(self, vocab):
        batch = make_batch(vocab, [[1, 2, 3]], 8)
        loss = compute_loss(np.zeros((1, 3, 8)), batch)
        assert loss == pytest.approx(math.log(8.0), rel=1e-12)

    def test_confident_correct_logits_vanish(self, vocab):
        targets = np.array([[1, 2]])
        logits = np.zeros((1, 2, 6))
        logits[0, 0, 1] = logits[0, 1, 2] = 50.0
        assert compute_loss(logits, make_batch(vocab, targets, 6)) < 1e-6

    def test_matches_nll_oracle(self, vocab):
        rng = np.random.default_rng(2)
        logits = rng.standard_normal((2, 5, 7))
        targets = rng.integers(0, 7, size=(2, 5))
        mask = rng.random((2, 5)) > 0.3
        mask[0, 0] = True
        batch = TrainBatch(np.zeros_like(targets), targets, mask,
                           PhraseTable.build([], vocab), ())
        total, count = 0.0, 0
        for b in range(2):
            for t in range(5):
                if not mask[b, t]:
                    continue
                row = logits[b, t]
                total += -math.log(math.exp(row[targets[b, t]]) / np.exp(row).sum())
                count += 1
        assert compute_loss(logits, batch) == pytest.approx(total / count, rel=1e-9)

    def test_shape_mismatch_rejected(self, vocab):
        batch = make_batch(vocab, [[1, 2]], 8)
        with pytest.raises(ValueError):
            compute_loss(np.zeros((1, 3, 8)), batch)
        with pytest.raises(ValueError):
            compute_loss(np.zeros((1, 2, 2)), batch)


def param_bytes(params, prefix):
    return {n: v.tobytes() for n, v in params.items() if n.startswith(prefix)}


class TestRegimes:
    def test_frozen_backbone_is_bit_identical(self, model):
        trainer = Trainer(model, TrainConfig(mode="frozen_backbone", batch_size=2,
                                             sampler=BIGRAMS, seed=4))
        before_lm = param_bytes(model.params, "lm.")
        before_pe = param_bytes(model.params, "pe.")
        trainer.run(TEXTS, steps=10)
        assert param_bytes(model.params, "lm.") == before_lm
        assert param_bytes(model.params, "pe.") != before_pe

    def test_full_mode_updates_everything_and_learns(self, model):
        trainer = Trainer(model, TrainConfig(mode="full", batch_size=4,
                                             learning_rate=3e-3, sampler=BIGRAMS,
                                             seed=0))
        before = {n: v.copy() for n, v in model.params.items()}
        losses = trainer.run(TEXTS, steps=200)
        assert losses[-1] < losses[0]
        windows = [np.mean(losses[i : i + 20]) for i in range(0, 200, 20)]
        assert all(b < a for a, b in zip(windows, windows[1:]))
        moved = {n for n, v in model.params.items()
                 if not np.array_equal(v, before[n])}
        assert any(n.startswith("lm.") for n in moved)
        assert any(n.startswith("pe.") for n in moved)
        assert any(n.startswith("proj.") for n in moved)

    def test_lora_changes_exactly_adapters_encoder_projector(self, model):
        trainer = Trainer(model, TrainConfig(mode="lora", batch_size=2,
                                             sampler=BIGRAMS, seed=2))
        before = {n: v.copy() for n, v in model.params.items()}
        trainer.run(TEXTS, steps=5)
        changed = {n for n, v in model.params.items()
                   if n not in before or not np.array_equal(v, before[n])}
        expected = {n for n in model.params
                    if n.startswith(("pe.", "proj.", "lora.")) and n != LORA_SCALE_KEY}
        assert changed == expected

    def test_lora_starts_as_identity(self, model, vocab):
        Trainer(model, TrainConfig(mode="lora", sampler=BIGRAMS))
        merged = merged_inference_params(model.params, model.config)
        np.testing.assert_array_equal(
            merged["lm.block0.attn.wq"], model.params["lm.block0.attn.wq"]
        )
        assert not any(n.startswith("lora.") for n in merged)

    def test_nonfinite_loss_aborts(self, model):
        trainer = Trainer(model, TrainConfig(mode="full", sampler=BIGRAMS))
        model.params["lm.out_emb"][:] = np.inf
        batch = trainer.assemble(["the cat sat"])
        with np.errstate(invalid="ignore", over="ignore"):
            with pytest.raises(TrainingError, match="non-finite"):
                trainer.train_step(batch)

    def test_mode_validated(self):
        with pytest.raises(ValueError):
            TrainConfig(mode="partial")

    def test_run_is_reproducible(self, vocab):
        def fresh():
            config = ModelConfig(vocab_size=vocab.size, d_model=16, n_layers=1,
                                 n_heads=2, pe_layers=1, pe_heads=2, d_ff=32,
                                 max_seq_len=32, pe_max_seq_len=8)
            m = DVAModel(config, vocab, seed=1)
            return Trainer(m, TrainConfig(batch_size=2, sampler=BIGRAMS, seed=7))

        assert fresh().run(TEXTS, steps=5) == fresh().run(TEXTS, steps=5)

    def test_json_log_lines(self, model):
        stream = io.StringIO()
        trainer = Trainer(model, TrainConfig(batch_size=2, sampler=BIGRAMS),
                          log_stream=stream)
        trainer.run(TEXTS, steps=3)
        lines = stream.getvalue().strip().splitlines()
        assert len(lines) == 3
        for i, line in enumerate(lines):
            record = json.loads(line)
            assert record["step"] == i + 1
            assert set(record) == {"step", "loss", "lr", "mode"}


class TestGradients:
    @pytest.fixture
    def tiny_model(self):
        texts = ["the cat sat", "a dog ran", "the dog sat"]
        vocab = train_static_vocab(DocumentSet.from_texts(texts), target_size=12)
        config = ModelConfig(vocab_size=vocab.size, d_model=8, n_layers=1, n_heads=2,
                             pe_layers=1, pe_heads=2, d_ff=16, max_seq_len=12,
                             pe_max_seq_len=6)
        return DVAModel(config, vocab, seed=5)

    def test_gradients_match_finite_differences(self, tiny_model):
        batch = assemble_batch(["the cat sat", "the dog sat"], BIGRAMS,
                               tiny_model.vocab, seed=1)
        assert batch.table.m >= 1
        assert gradient_check(tiny_model, batch, epsilon=1e-3) < 1e-4

    def test_dead_path_gets_no_gradient(self, tiny_model):
        no_phrases = SamplerConfig(strategy="ntoken", n=1)
        batch = assemble_batch(["the cat sat"], no_phrases, tiny_model.vocab, seed=0)
        assert batch.table.m == 0
        loss, leaves = batch_loss_t(tiny_model, batch, set(tiny_model.params))
        ad.backward(loss)
        assert all(leaves[n].grad is None for n in leaves if n.startswith(("pe.", "proj.")))

    def test_phrase_target_reaches_encoder(self, tiny_model):
        batch = assemble_batch(["the cat sat", "the cat ran"], BIGRAMS,
                               tiny_model.vocab, seed=1)
        assert batch.table.m >= 1
        assert any(t >= tiny_model.vocab.size for t in batch.target_ids.flatten())
        loss, leaves = batch_loss_t(tiny_model, batch, set(tiny_model.params))
        ad.backward(loss)
        grad = leaves["pe.tok_emb"].grad
        assert grad is not None and np.abs(grad).max() > 0
