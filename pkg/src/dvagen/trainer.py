"""Training loop: batch sampling -> phrase sampling -> mixed encoding ->
cross-entropy over the expanded vocabulary.

Three parameter regimes share one step function. "full" updates everything;
"frozen_backbone" freezes every lm.* tensor bit-for-bit; "lora" freezes the
backbone but learns low-rank corrections on the attention query/value
projections. The phrase encoder and projector train in every regime.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .dva_model import (
    LORA_SCALE_KEY,
    DVAModel,
    ModelConfig,
    forward_logits_t,
    merged_inference_params,
)
from .dva_tokenizer import MixedSequence, PhraseTable, encode
from .phrase_sampler import CorpusIndex, SamplerConfig, make_sampler
from .text_base import StaticVocab

MODES = ("full", "frozen_backbone", "lora")


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 8
    mode: str = "full"
    lora_rank: int = 8
    lora_alpha: int = 16
    learning_rate: float = 3e-4
    steps: int = 100
    seed: int = 0
    grad_clip: float = 1.0
    sampler: SamplerConfig = field(default_factory=SamplerConfig)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.mode == "lora" and self.lora_rank < 1:
            raise ValueError("lora_rank must be >= 1 in lora mode")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")


@dataclass(frozen=True)
class TrainBatch:
    input_ids: np.ndarray
    target_ids: np.ndarray
    target_mask: np.ndarray
    table: PhraseTable
    sequences: tuple[MixedSequence, ...]


def assemble_batch(samples: list[str], sampler_config: SamplerConfig,
                   vocab: StaticVocab, seed: int, *,
                   index: CorpusIndex | None = None,
                   max_len: int | None = None) -> TrainBatch:
    """Sample phrases from the batch's own texts, merge them into one
    deduplicated table, and encode every sample against it.

    Sequences are BOS-framed, EOS-terminated, right-padded. Rows longer than
    max_len are truncated (losing their EOS).
    """
    if not samples:
        raise ValueError("cannot assemble an empty batch")
    sampler = make_sampler(sampler_config, vocab=vocab, index=index)
    surfaces: list[str] = []
    for i, text in enumerate(samples):
        surfaces.extend(sampler(text, seed=[seed, i]))
    table = PhraseTable.build(surfaces, vocab)

    sequences = tuple(encode(text, table, vocab) for text in samples)
    framed = [
        [vocab.bos_id, *seq.ids, vocab.eos_id][: max_len or None]
        for seq in sequences
    ]
    width = max(len(row) for row in framed)
    padded = np.full((len(framed), width), vocab.pad_id, dtype=np.int64)
    lengths = np.zeros(len(framed), dtype=np.int64)
    for i, row in enumerate(framed):
        padded[i, : len(row)] = row
        lengths[i] = len(row)

    input_ids = padded[:, :-1]
    target_ids = padded[:, 1:]
    target_mask = np.arange(width - 1)[None, :] < (lengths - 1)[:, None]
    assert int(padded.max()) < vocab.size + table.m
    return TrainBatch(input_ids, target_ids, target_mask, table, sequences)


def compute_loss(logits, batch: TrainBatch):
    """Mean cross-entropy over unmasked targets; tokens and phrases weigh the
    same. Tensor logits give a Tensor back (for backward), arrays a float."""
    shape = np.shape(logits.data if isinstance(logits, ad.Tensor) else logits)
    if shape[:2] != batch.target_ids.shape:
        raise ValueError(f"logits {shape} do not cover targets {batch.target_ids.shape}")
    if shape[2] <= int(batch.target_ids.max()):
        raise ValueError("logit width smaller than the largest target id")
    if isinstance(logits, ad.Tensor):
        return ad.masked_cross_entropy(logits, batch.target_ids, batch.target_mask)
    out = ad.masked_cross_entropy(ad.Tensor(logits), batch.target_ids, batch.target_mask)
    return float(out.data)


def init_lora_params(config: ModelConfig, train: TrainConfig,
                     seed: int = 0) -> dict[str, np.ndarray]:
    """Rank-r factors on every attention q/v projection. The B factor starts
    at zero so the initial correction is exactly zero."""
    rng = np.random.default_rng(seed)
    d, r = config.d_model, train.lora_rank
    p: dict[str, np.ndarray] = {LORA_SCALE_KEY: np.array(train.lora_alpha / r)}
    for i in range(config.n_layers):
        for proj in ("q", "v"):
            p[f"lora.block{i}.{proj}.a"] = rng.normal(0.0, config.init_std, size=(d, r))
            p[f"lora.block{i}.{proj}.b"] = np.zeros((r, d))
    return p


def trainable_names(params: dict[str, np.ndarray], mode: str) -> set[str]:
    if mode == "full":
        return set(params)
    prefixes = ("pe.", "proj.") if mode == "frozen_backbone" else ("pe.", "proj.", "lora.")
    return {n for n in params if n.startswith(prefixes) and n != LORA_SCALE_KEY}


def _composed_params(leaves: dict[str, ad.Tensor], config: ModelConfig,
                     params: dict[str, np.ndarray]) -> dict[str, ad.Tensor]:
    """Apply low-rank corrections on top of the leaf tensors when present."""
    composed = dict(leaves)
    if LORA_SCALE_KEY not in params:
        return composed
    scale = float(params[LORA_SCALE_KEY])
    for i in range(config.n_layers):
        for proj in ("q", "v"):
            base = leaves[f"lm.block{i}.attn.w{proj}"]
            a = leaves[f"lora.block{i}.{proj}.a"]
            b = leaves[f"lora.block{i}.{proj}.b"]
            composed[f"lm.block{i}.attn.w{proj}"] = ad.add(
                base, ad.scale(ad.matmul(a, b), scale)
            )
    return composed


def batch_loss_t(model: DVAModel, batch: TrainBatch,
                 trainable: set[str]) -> tuple[ad.Tensor, dict[str, ad.Tensor]]:
    """Build the tape once: leaf tensors, composed weights, logits, loss."""
    leaves = {
        name: ad.Tensor(value, requires_grad=name in trainable)
        for name, value in model.params.items()
    }
    composed = _composed_params(leaves, model.config, model.params)
    logits = forward_logits_t(composed, model.config, batch.input_ids,
                              batch.table, model.vocab)
    return compute_loss(logits, batch), leaves


def gradient_check(model: DVAModel, batch: TrainBatch,
                   epsilon: float = 1e-3) -> float:
    """Max over parameter tensors of the relative gap between tape gradients
    and central finite differences of the same loss."""
    loss, leaves = batch_loss_t(model, batch, set(model.params))
    ad.backward(loss)

    def loss_at() -> float:
        with ad.no_grad():
            value, _ = batch_loss_t(model, batch, set())
        return float(value.data)

    worst = 0.0
    for name, value in model.params.items():
        analytic = leaves[name].grad
        if analytic is None:
            analytic = np.zeros_like(value)
        numeric = np.zeros_like(value)
        flat, nflat = value.reshape(-1), numeric.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            hi = loss_at()
            flat[i] = orig - epsilon
            lo = loss_at()
            flat[i] = orig
            nflat[i] = (hi - lo) / (2.0 * epsilon)
        denom = max(np.linalg.norm(analytic) + np.linalg.norm(numeric), 1e-12)
        worst = max(worst, float(np.linalg.norm(analytic - numeric) / denom))
    return worst


class Trainer:
    """Owns optimizer state and the step counter; mutates model.params in
    place (single writer)."""

    def __init__(self, model: DVAModel, config: TrainConfig, *,
                 index: CorpusIndex | None = None, log_stream=None):
        self.model = model
        self.config = config
        self.index = index
        self.log_stream = log_stream
        if config.mode == "lora" and LORA_SCALE_KEY not in model.params:
            model.params.update(init_lora_params(model.config, config, seed=config.seed))
        self.trainable = trainable_names(model.params, config.mode)
        self._m = {n: np.zeros_like(model.params[n]) for n in self.trainable}
        self._v = {n: np.zeros_like(model.params[n]) for n in self.trainable}
        self.step_count = 0

    def assemble(self, samples: list[str], seed: int | None = None) -> TrainBatch:
        return assemble_batch(
            samples, self.config.sampler, self.model.vocab,
            self.config.seed if seed is None else seed,
            index=self.index, max_len=self.model.config.max_seq_len + 1,
        )

    def train_step(self, batch: TrainBatch) -> float:
        loss, leaves = batch_loss_t(self.model, batch, self.trainable)
        value = float(loss.data)
        if not np.isfinite(value):
            raise TrainingError(
                f"non-finite loss {value} at step {self.step_count}; "
                f"table m={batch.table.m}, batch {batch.input_ids.shape}"
            )
        ad.backward(loss)
        grads = {
            name: (leaves[name].grad if leaves[name].grad is not None
                   else np.zeros_like(self.model.params[name]))
            for name in self.trainable
        }
        total = float(np.sqrt(sum(float((g * g).sum()) for g in grads.values())))
        if self.config.grad_clip > 0 and total > self.config.grad_clip:
            shrink = self.config.grad_clip / total
            for g in grads.values():
                g *= shrink

        self.step_count += 1
        t = self.step_count
        lr, b1, b2, eps = self.config.learning_rate, 0.9, 0.999, 1e-8
        for name, g in grads.items():
            self._m[name] = b1 * self._m[name] + (1 - b1) * g
            self._v[name] = b2 * self._v[name] + (1 - b2) * g * g
            mhat = self._m[name] / (1 - b1**t)
            vhat = self._v[name] / (1 - b2**t)
            self.model.params[name] -= lr * mhat / (np.sqrt(vhat) + eps)

        if self.log_stream is not None:
            record = {"step": t, "loss": value, "lr": lr, "mode": self.config.mode}
            self.log_stream.write(json.dumps(record) + "\n")
        return value

    def run(self, texts: list[str], steps: int | None = None) -> list[float]:
        """Seed-pinned loop: step s draws batch_size texts and assembles with
        a per-step seed, so the whole run replays identically."""
        if not texts:
            raise ValueError("cannot train on an empty text list")
        n_steps = self.config.steps if steps is None else steps
        rng = np.random.default_rng(self.config.seed)
        losses = []
        for s in range(n_steps):
            picks = rng.integers(0, len(texts), size=self.config.batch_size)
            samples = [texts[int(i)] for i in picks]
            batch = self.assemble(samples, seed=self.config.seed * 100003 + s)
            losses.append(self.train_step(batch))
        return losses
