"""The dynamic-vocabulary model: a causal-transformer backbone whose logits
range over the static vocabulary plus a batch of phrase entries.

Phrases are encoded by a second, smaller causal transformer; the last real
token's hidden state passes through a two-layer MLP projector to produce one
embedding per phrase. That embedding is appended to both the input and the
output embedding matrix, so a phrase behaves exactly like one extra token of
the vocabulary for the duration of a batch.

Two forward implementations live here on purpose. The training path runs on
the autodiff tape so gradients flow through the backbone, the phrase encoder,
and the projector. The inference path is plain numpy with a key/value cache.
They share no code; tests pin their agreement.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import erf

from . import autodiff as ad
from .dva_tokenizer import PhraseTable
from .text_base import StaticVocab

CKPT_MAGIC = "dva-ckpt v1"

_INV_SQRT2 = 1.0 / np.sqrt(2.0)


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    d_model: int = 64
    n_layers: int = 2
    n_heads: int = 4
    pe_layers: int = 2
    pe_heads: int = 4
    d_ff: int = 0
    max_seq_len: int = 128
    pe_max_seq_len: int = 32
    init_std: float = 0.02
    ln_eps: float = 1e-5

    def __post_init__(self):
        if self.vocab_size < 4:
            raise ValueError("vocab_size must cover the four reserved entries")
        if self.d_model % self.n_heads != 0 or self.d_model % self.pe_heads != 0:
            raise ValueError("d_model must be divisible by both head counts")
        if self.max_seq_len < 2 or self.pe_max_seq_len < 2:
            raise ValueError("sequence windows must be at least 2")
        if self.d_ff == 0:
            object.__setattr__(self, "d_ff", 4 * self.d_model)


def init_params(config: ModelConfig, seed: int = 0) -> dict[str, np.ndarray]:
    """Fresh parameters: normal(0, init_std) weights, zero biases, unit
    layer-norm gains. Draw order is fixed, so a seed pins every tensor."""
    rng = np.random.default_rng(seed)
    d, f = config.d_model, config.d_ff
    p: dict[str, np.ndarray] = {}

    def w(name: str, *shape: int) -> None:
        p[name] = rng.normal(0.0, config.init_std, size=shape)

    def b(name: str, *shape: int) -> None:
        p[name] = np.zeros(shape)

    def block(prefix: str) -> None:
        p[f"{prefix}.ln1.g"] = np.ones(d)
        b(f"{prefix}.ln1.b", d)
        for proj in ("q", "k", "v", "o"):
            w(f"{prefix}.attn.w{proj}", d, d)
            b(f"{prefix}.attn.b{proj}", d)
        p[f"{prefix}.ln2.g"] = np.ones(d)
        b(f"{prefix}.ln2.b", d)
        w(f"{prefix}.ffn.w1", d, f)
        b(f"{prefix}.ffn.b1", f)
        w(f"{prefix}.ffn.w2", f, d)
        b(f"{prefix}.ffn.b2", d)

    w("lm.tok_emb", config.vocab_size, d)
    w("lm.pos_emb", config.max_seq_len, d)
    w("lm.out_emb", config.vocab_size, d)
    for i in range(config.n_layers):
        block(f"lm.block{i}")
    p["lm.lnf.g"] = np.ones(d)
    b("lm.lnf.b", d)

    w("pe.tok_emb", config.vocab_size, d)
    w("pe.pos_emb", config.pe_max_seq_len, d)
    for i in range(config.pe_layers):
        block(f"pe.block{i}")
    p["pe.lnf.g"] = np.ones(d)
    b("pe.lnf.b", d)

    w("proj.w1", d, d)
    b("proj.b1", d)
    w("proj.w2", d, d)
    b("proj.b2", d)
    return p


def causal_bias(t: int) -> np.ndarray:
    """Additive attention mask: 0 on and below the diagonal, -inf above."""
    return np.triu(np.full((t, t), -np.inf), k=1)


def phrase_input_ids(table: PhraseTable, vocab: StaticVocab,
                     max_len: int) -> tuple[np.ndarray, np.ndarray]:
    """BOS-framed, right-padded subword ids for the phrase encoder, plus the
    index of each phrase's last real token."""
    if table.m == 0:
        return np.zeros((0, 1), dtype=np.int64), np.zeros(0, dtype=np.int64)
    lengths = np.array([len(phr.subword_ids) for phr in table.phrases], dtype=np.int64)
    width = int(lengths.max()) + 1
    if width > max_len:
        worst = table.phrases[int(lengths.argmax())].surface
        raise ValueError(
            f"phrase {worst!r} needs {int(lengths.max())} subwords + BOS, "
            f"over the encoder window of {max_len}"
        )
    ids = np.full((table.m, width), vocab.pad_id, dtype=np.int64)
    ids[:, 0] = vocab.bos_id
    for j, phr in enumerate(table.phrases):
        ids[j, 1 : 1 + len(phr.subword_ids)] = phr.subword_ids
    return ids, lengths


# ---------------------------------------------------------------------------
# Training path: every op goes through the autodiff tape.
# ---------------------------------------------------------------------------

def _block_t(p: dict[str, ad.Tensor], prefix: str, x: ad.Tensor, heads: int,
             bias: np.ndarray, eps: float) -> ad.Tensor:
    batch, time, d = x.data.shape
    hd = d // heads

    h = ad.layer_norm(x, p[f"{prefix}.ln1.g"], p[f"{prefix}.ln1.b"], eps)

    def heads_view(t: ad.Tensor) -> ad.Tensor:
        return ad.transpose(ad.reshape(t, (batch, time, heads, hd)), (0, 2, 1, 3))

    q = heads_view(ad.add(ad.matmul(h, p[f"{prefix}.attn.wq"]), p[f"{prefix}.attn.bq"]))
    k = heads_view(ad.add(ad.matmul(h, p[f"{prefix}.attn.wk"]), p[f"{prefix}.attn.bk"]))
    v = heads_view(ad.add(ad.matmul(h, p[f"{prefix}.attn.wv"]), p[f"{prefix}.attn.bv"]))

    scores = ad.scale(ad.matmul(q, ad.transpose(k, (0, 1, 3, 2))), 1.0 / np.sqrt(hd))
    probs = ad.softmax_last(scores, bias=bias)
    ctx = ad.reshape(ad.transpose(ad.matmul(probs, v), (0, 2, 1, 3)), (batch, time, d))
    attn = ad.add(ad.matmul(ctx, p[f"{prefix}.attn.wo"]), p[f"{prefix}.attn.bo"])
    x = ad.add(x, attn)

    h = ad.layer_norm(x, p[f"{prefix}.ln2.g"], p[f"{prefix}.ln2.b"], eps)
    inner = ad.gelu(ad.add(ad.matmul(h, p[f"{prefix}.ffn.w1"]), p[f"{prefix}.ffn.b1"]))
    mlp = ad.add(ad.matmul(inner, p[f"{prefix}.ffn.w2"]), p[f"{prefix}.ffn.b2"])
    return ad.add(x, mlp)


def _stack_t(p: dict[str, ad.Tensor], prefix: str, x: ad.Tensor, layers: int,
             heads: int, eps: float) -> ad.Tensor:
    bias = causal_bias(x.data.shape[1])
    for i in range(layers):
        x = _block_t(p, f"{prefix}.block{i}", x, heads, bias, eps)
    return ad.layer_norm(x, p[f"{prefix}.lnf.g"], p[f"{prefix}.lnf.b"], eps)


def encode_phrases_t(p: dict[str, ad.Tensor], config: ModelConfig,
                     table: PhraseTable, vocab: StaticVocab) -> ad.Tensor:
    """Differentiable phrase embeddings, shape (m, d). All phrases run as one
    padded batch; right padding beyond a phrase's last token cannot leak into
    its hidden state because attention is causal."""
    ids, lengths = phrase_input_ids(table, vocab, config.pe_max_seq_len)
    if table.m == 0:
        return ad.Tensor(np.zeros((0, config.d_model)))
    tok = ad.take_rows(p["pe.tok_emb"], ids)
    pos = ad.take_rows(p["pe.pos_emb"], np.arange(ids.shape[1]))
    h = _stack_t(p, "pe", ad.add(tok, pos), config.pe_layers, config.pe_heads, config.ln_eps)
    last = ad.take_time(h, lengths)
    hidden = ad.gelu(ad.add(ad.matmul(last, p["proj.w1"]), p["proj.b1"]))
    return ad.add(ad.matmul(hidden, p["proj.w2"]), p["proj.b2"])


def forward_logits_t(p: dict[str, ad.Tensor], config: ModelConfig, ids: np.ndarray,
                     table: PhraseTable, vocab: StaticVocab) -> ad.Tensor:
    """Differentiable forward over right-padded ids: (B, T, |V|+m) logits.

    The phrase embedding block feeds both the input lookup and the output
    projection, so one shared vector per phrase receives gradient from both
    roles."""
    ids = np.asarray(ids, dtype=np.int64)
    width = config.vocab_size + table.m
    if ids.size and (ids.min() < 0 or ids.max() >= width):
        raise ValueError(f"id out of range for expanded vocabulary of {width}")
    if ids.shape[1] > config.max_seq_len:
        raise ValueError("sequence exceeds max_seq_len")
    if table.m > 0:
        ep = encode_phrases_t(p, config, table, vocab)
        e_in = ad.concat_rows(p["lm.tok_emb"], ep)
        e_out = ad.concat_rows(p["lm.out_emb"], ep)
    else:
        e_in = p["lm.tok_emb"]
        e_out = p["lm.out_emb"]
    x = ad.add(ad.take_rows(e_in, ids), ad.take_rows(p["lm.pos_emb"], np.arange(ids.shape[1])))
    h = _stack_t(p, "lm", x, config.n_layers, config.n_heads, config.ln_eps)
    return ad.matmul(h, ad.transpose(e_out, (1, 0)))


# ---------------------------------------------------------------------------
# Inference path: plain numpy, left-padding aware, with a key/value cache.
# ---------------------------------------------------------------------------

def _gelu_np(x: np.ndarray) -> np.ndarray:
    return x * 0.5 * (1.0 + erf(x * _INV_SQRT2))


def _ln_np(x: np.ndarray, g: np.ndarray, b: np.ndarray, eps: float) -> np.ndarray:
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    return g * (xc / np.sqrt(var + eps)) + b


def _softmax_np(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class KVCache:
    """Preallocated per-layer key/value storage for incremental decoding."""

    keys: list[np.ndarray]
    values: list[np.ndarray]
    key_real: np.ndarray
    t: int = 0

    @property
    def capacity(self) -> int:
        return self.key_real.shape[1]


def make_cache(config: ModelConfig, batch: int, capacity: int) -> KVCache:
    hd = config.d_model // config.n_heads
    shape = (batch, config.n_heads, capacity, hd)
    return KVCache(
        keys=[np.zeros(shape) for _ in range(config.n_layers)],
        values=[np.zeros(shape) for _ in range(config.n_layers)],
        key_real=np.zeros((batch, capacity), dtype=bool),
    )


@dataclass
class StepState:
    """What one decoding step hands to the next: the last hidden state per
    sample and the cache holding everything already attended to."""

    h: np.ndarray
    cache: KVCache


def _infer_bias(real_mask: np.ndarray) -> np.ndarray:
    """Additive mask for a left-padded prefill: causal, pad keys hidden, and
    the diagonal forced open so pad queries keep a finite row (their outputs
    are never read)."""
    batch, time = real_mask.shape
    bias = np.where(real_mask, 0.0, -np.inf)[:, None, None, :] + causal_bias(time)
    idx = np.arange(time)
    bias[:, :, idx, idx] = 0.0
    return bias


def _attend_np(p: dict[str, np.ndarray], prefix: str, h: np.ndarray, heads: int,
               ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    batch, time, d = h.shape
    hd = d // heads

    def split(name: str) -> np.ndarray:
        out = h @ p[f"{prefix}.w{name}"] + p[f"{prefix}.b{name}"]
        return out.reshape(batch, time, heads, hd).transpose(0, 2, 1, 3)

    return split("q"), split("k"), split("v")


def _block_np(p: dict[str, np.ndarray], prefix: str, x: np.ndarray, heads: int,
              bias: np.ndarray, eps: float,
              cache: KVCache | None = None, layer: int = 0) -> np.ndarray:
    batch, time, d = x.shape
    hd = d // heads
    h = _ln_np(x, p[f"{prefix}.ln1.g"], p[f"{prefix}.ln1.b"], eps)
    q, k, v = _attend_np(p, f"{prefix}.attn", h, heads)
    if cache is not None:
        cache.keys[layer][:, :, :time] = k
        cache.values[layer][:, :, :time] = v
    probs = _softmax_np(q @ k.swapaxes(-1, -2) / np.sqrt(hd) + bias)
    ctx = (probs @ v).transpose(0, 2, 1, 3).reshape(batch, time, d)
    x = x + ctx @ p[f"{prefix}.attn.wo"] + p[f"{prefix}.attn.bo"]
    h = _ln_np(x, p[f"{prefix}.ln2.g"], p[f"{prefix}.ln2.b"], eps)
    inner = _gelu_np(h @ p[f"{prefix}.ffn.w1"] + p[f"{prefix}.ffn.b1"])
    return x + inner @ p[f"{prefix}.ffn.w2"] + p[f"{prefix}.ffn.b2"]


def encode_phrases_np(params: dict[str, np.ndarray], config: ModelConfig,
                      table: PhraseTable, vocab: StaticVocab) -> np.ndarray:
    """Plain-numpy phrase embeddings, shape (m, d)."""
    ids, lengths = phrase_input_ids(table, vocab, config.pe_max_seq_len)
    if table.m == 0:
        return np.zeros((0, config.d_model))
    x = params["pe.tok_emb"][ids] + params["pe.pos_emb"][: ids.shape[1]]
    bias = causal_bias(ids.shape[1])
    for i in range(config.pe_layers):
        x = _block_np(params, f"pe.block{i}", x, config.pe_heads, bias, config.ln_eps)
    h = _ln_np(x, params["pe.lnf.g"], params["pe.lnf.b"], config.ln_eps)
    last = h[np.arange(table.m), lengths]
    hidden = _gelu_np(last @ params["proj.w1"] + params["proj.b1"])
    return hidden @ params["proj.w2"] + params["proj.b2"]


@dataclass(frozen=True)
class ExpandedEmbeddings:
    """Input and output embedding matrices over the widened id space; rows
    [0, |V|) are the originals, row |V|+j is phrase j in both."""

    e_in: np.ndarray
    e_out: np.ndarray

    @property
    def width(self) -> int:
        return self.e_in.shape[0]


def expand_embeddings(e_in: np.ndarray, e_out: np.ndarray,
                      ep: np.ndarray) -> ExpandedEmbeddings:
    if e_in.shape != e_out.shape:
        raise ValueError("input/output embedding shapes disagree")
    if ep.ndim != 2 or ep.shape[1] != e_in.shape[1]:
        raise ValueError(
            f"phrase embedding width {ep.shape} does not match d={e_in.shape[1]}"
        )
    return ExpandedEmbeddings(
        e_in=np.concatenate([e_in, ep], axis=0),
        e_out=np.concatenate([e_out, ep], axis=0),
    )


def hidden_states_np(params: dict[str, np.ndarray], config: ModelConfig,
                     ids: np.ndarray, exp: ExpandedEmbeddings,
                     real_mask: np.ndarray | None = None) -> np.ndarray:
    """Final-layer hidden states (B, T, d). With a real_mask the batch is
    treated as left-padded: pad keys are hidden and positions count real
    tokens only."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= exp.width):
        raise ValueError(f"id out of range for expanded vocabulary of {exp.width}")
    batch, time = ids.shape
    if time > config.max_seq_len:
        raise ValueError("sequence exceeds max_seq_len")
    if real_mask is None:
        pos = np.broadcast_to(np.arange(time), (batch, time))
        bias = causal_bias(time)
    else:
        pos = np.maximum(np.cumsum(real_mask, axis=1) - 1, 0)
        bias = _infer_bias(real_mask)
    x = exp.e_in[ids] + params["lm.pos_emb"][pos]
    for i in range(config.n_layers):
        x = _block_np(params, f"lm.block{i}", x, config.n_heads, bias, config.ln_eps)
    return _ln_np(x, params["lm.lnf.g"], params["lm.lnf.b"], config.ln_eps)


def forward_logits_np(params: dict[str, np.ndarray], config: ModelConfig,
                      ids: np.ndarray, exp: ExpandedEmbeddings,
                      real_mask: np.ndarray | None = None) -> np.ndarray:
    """Full-recompute logits (B, T, width)."""
    return hidden_states_np(params, config, ids, exp, real_mask=real_mask) @ exp.e_out.T


def prefill(params: dict[str, np.ndarray], config: ModelConfig, ids: np.ndarray,
            real_mask: np.ndarray, exp: ExpandedEmbeddings,
            capacity: int) -> StepState:
    """Run a left-padded prompt batch once, filling the cache; returns the
    hidden state at the right edge (real for every sample by construction)."""
    ids = np.asarray(ids, dtype=np.int64)
    batch, time = ids.shape
    if capacity < time:
        raise ValueError("cache capacity below prompt length")
    cache = make_cache(config, batch, capacity)
    pos = np.maximum(np.cumsum(real_mask, axis=1) - 1, 0)
    bias = _infer_bias(real_mask)
    x = exp.e_in[ids] + params["lm.pos_emb"][pos]
    for i in range(config.n_layers):
        x = _block_np(params, f"lm.block{i}", x, config.n_heads, bias,
                      config.ln_eps, cache=cache, layer=i)
    h = _ln_np(x, params["lm.lnf.g"], params["lm.lnf.b"], config.ln_eps)
    cache.key_real[:, :time] = real_mask
    cache.t = time
    return StepState(h=h[:, -1], cache=cache)


def decode_step(params: dict[str, np.ndarray], config: ModelConfig,
                ids_t: np.ndarray, pos_t: np.ndarray, exp: ExpandedEmbeddings,
                cache: KVCache) -> np.ndarray:
    """Advance every sample by one id against the cache; returns (B, d)."""
    t = cache.t
    if t >= cache.capacity:
        raise ValueError("cache capacity exhausted")
    batch = ids_t.shape[0]
    heads = config.n_heads
    hd = config.d_model // heads
    x = exp.e_in[np.asarray(ids_t, dtype=np.int64)] + params["lm.pos_emb"][pos_t]
    key_bias = np.where(cache.key_real[:, : t + 1], 0.0, -np.inf)[:, None, None, :]
    key_bias[:, :, :, t] = 0.0
    for i in range(config.n_layers):
        prefix = f"lm.block{i}"
        h = _ln_np(x, params[f"{prefix}.ln1.g"], params[f"{prefix}.ln1.b"], config.ln_eps)

        def split(name: str) -> np.ndarray:
            out = h @ params[f"{prefix}.attn.w{name}"] + params[f"{prefix}.attn.b{name}"]
            return out.reshape(batch, heads, 1, hd)

        q, k, v = split("q"), split("k"), split("v")
        cache.keys[i][:, :, t : t + 1] = k
        cache.values[i][:, :, t : t + 1] = v
        ks = cache.keys[i][:, :, : t + 1]
        vs = cache.values[i][:, :, : t + 1]
        probs = _softmax_np(q @ ks.swapaxes(-1, -2) / np.sqrt(hd) + key_bias)
        ctx = (probs @ vs).reshape(batch, config.d_model)
        x = x + ctx @ params[f"{prefix}.attn.wo"] + params[f"{prefix}.attn.bo"]
        h = _ln_np(x, params[f"{prefix}.ln2.g"], params[f"{prefix}.ln2.b"], config.ln_eps)
        inner = _gelu_np(h @ params[f"{prefix}.ffn.w1"] + params[f"{prefix}.ffn.b1"])
        x = x + inner @ params[f"{prefix}.ffn.w2"] + params[f"{prefix}.ffn.b2"]
    cache.key_real[:, t] = True
    cache.t = t + 1
    return _ln_np(x, params["lm.lnf.g"], params["lm.lnf.b"], config.ln_eps)


def next_distribution(h: np.ndarray, exp: ExpandedEmbeddings, temperature: float,
                      bias: np.ndarray | None = None) -> np.ndarray:
    """softmax(h · E_out'^T / temperature), optionally with an additive logit
    mask applied first. -inf masked entries come out exactly zero."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    logits = h @ exp.e_out.T
    if bias is not None:
        logits = logits + bias
    return _softmax_np(logits / temperature)


# ---------------------------------------------------------------------------
# The model object and its checkpoint container.
# ---------------------------------------------------------------------------

LORA_SCALE_KEY = "lora.scale"


def merged_inference_params(params: dict[str, np.ndarray],
                            config: ModelConfig) -> dict[str, np.ndarray]:
    """Plain-array view with any low-rank attention corrections folded into
    the backbone weights and the factors dropped. No-op without factors."""
    if LORA_SCALE_KEY not in params:
        return params
    scale = float(params[LORA_SCALE_KEY])
    merged = {n: v for n, v in params.items() if not n.startswith("lora.")}
    for i in range(config.n_layers):
        for proj in ("q", "v"):
            name = f"lm.block{i}.attn.w{proj}"
            merged[name] = params[name] + scale * (
                params[f"lora.block{i}.{proj}.a"] @ params[f"lora.block{i}.{proj}.b"]
            )
    return merged


class DVAModel:
    """Configuration, vocabulary, and parameters under one handle."""

    def __init__(self, config: ModelConfig, vocab: StaticVocab,
                 params: dict[str, np.ndarray] | None = None, seed: int = 0):
        if config.vocab_size != vocab.size:
            raise ValueError(
                f"config says {config.vocab_size} vocabulary entries, "
                f"vocabulary has {vocab.size}"
            )
        self.config = config
        self.vocab = vocab
        self.params = init_params(config, seed) if params is None else params

    def fingerprint(self) -> str:
        """Stable digest of config plus parameters at checkpoint precision."""
        digest = hashlib.sha256()
        digest.update(json.dumps(asdict(self.config), sort_keys=True).encode())
        for name in sorted(self.params):
            digest.update(name.encode())
            digest.update(self.params[name].astype("<f4").tobytes())
        return digest.hexdigest()

    def encode_phrases(self, table: PhraseTable) -> np.ndarray:
        return encode_phrases_np(self.params, self.config, table, self.vocab)

    def expanded(self, table: PhraseTable | None = None) -> ExpandedEmbeddings:
        ep = (np.zeros((0, self.config.d_model)) if table is None or table.m == 0
              else self.encode_phrases(table))
        return expand_embeddings(self.params["lm.tok_emb"], self.params["lm.out_emb"], ep)

    def inference_params(self) -> dict[str, np.ndarray]:
        return merged_inference_params(self.params, self.config)

    def hidden(self, ids: np.ndarray, table: PhraseTable | None = None,
               real_mask: np.ndarray | None = None) -> np.ndarray:
        return hidden_states_np(self.inference_params(), self.config, ids,
                                self.expanded(table), real_mask=real_mask)

    def logits(self, ids: np.ndarray, table: PhraseTable | None = None,
               real_mask: np.ndarray | None = None) -> np.ndarray:
        return forward_logits_np(self.inference_params(), self.config, ids,
                                 self.expanded(table), real_mask=real_mask)


def save_checkpoint(model: DVAModel, path) -> None:
    names = sorted(model.params)
    header = {
        "config": asdict(model.config),
        "vocab_fingerprint": model.vocab.fingerprint,
        "tensors": [{"name": n, "shape": list(model.params[n].shape)} for n in names],
    }
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC.encode() + b"\n")
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        for name in names:
            fh.write(model.params[name].astype("<f4").tobytes())


def load_checkpoint(path, vocab: StaticVocab) -> DVAModel:
    with open(path, "rb") as fh:
        magic = fh.readline().rstrip(b"\n").decode()
        if magic != CKPT_MAGIC:
            raise ValueError(f"not a {CKPT_MAGIC} file: header reads {magic!r}")
        header = json.loads(fh.readline())
        if header["vocab_fingerprint"] != vocab.fingerprint:
            raise ValueError("checkpoint was trained against a different vocabulary")
        config = ModelConfig(**header["config"])
        params: dict[str, np.ndarray] = {}
        for spec in header["tensors"]:
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(4 * count)
            if len(buf) != 4 * count:
                raise ValueError(f"checkpoint truncated at tensor {spec['name']!r}")
            params[spec["name"]] = (
                np.frombuffer(buf, dtype="<f4").astype(np.float64).reshape(shape)
            )
    return DVAModel(config, vocab, params=params)
