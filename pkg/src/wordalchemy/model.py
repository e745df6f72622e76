"""Encoder-decoder transformer with bucketed relative-position attention bias.

Conventions: pre-RMSNorm sublayers with residual connections, no biases in
linear projections, relative-position bias tables shared across layers (one
table per attention kind: encoder self, decoder self, cross), decoder start
token = pad id, optional tying of the output projection to the token
embedding. Attention masking is additive: masked logits get a large negative
bias so their softmax weights are exactly zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import numerics as nm
from .errors import ConfigError, ShapeError
from .numerics import Tensor
from .tokenizer import PAD_ID

DECODER_START_ID = PAD_ID
INIT_STD = 0.02


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    d_model: int = 256
    n_heads: int = 4
    d_ff: int = 1024
    n_enc_layers: int = 4
    n_dec_layers: int = 4
    rel_pos_buckets: int = 32
    rel_pos_max_distance: int = 128
    max_input_len: int = 64
    max_label_len: int = 16
    tie_embeddings: bool = True
    dropout: float = 0.0

    def validate(self) -> None:
        counts = {
            "vocab_size": self.vocab_size,
            "d_model": self.d_model,
            "n_heads": self.n_heads,
            "d_ff": self.d_ff,
            "n_enc_layers": self.n_enc_layers,
            "n_dec_layers": self.n_dec_layers,
            "rel_pos_buckets": self.rel_pos_buckets,
            "rel_pos_max_distance": self.rel_pos_max_distance,
            "max_input_len": self.max_input_len,
            "max_label_len": self.max_label_len,
        }
        for name, value in counts.items():
            if int(value) < 1:
                raise ConfigError(f"{name} must be >= 1, got {value}")
        if self.d_model % self.n_heads != 0:
            raise ConfigError(f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        if self.rel_pos_buckets % 2 != 0:
            raise ConfigError(f"rel_pos_buckets must be even, got {self.rel_pos_buckets}")
        if not (0.0 <= self.dropout < 1.0):
            raise ConfigError(f"dropout must be in [0,1), got {self.dropout}")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        cfg = cls(**d)
        cfg.validate()
        return cfg


class ModelParams:
    """Named parameter tensors shaped by a ModelConfig."""

    def __init__(self, config: ModelConfig, tensors: dict[str, Tensor]):
        self.config = config
        self.tensors = tensors

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def names(self) -> list[str]:
        return list(self.tensors)

    def n_parameters(self) -> int:
        return sum(t.data.size for t in self.tensors.values())

    def astype(self, dtype) -> "ModelParams":
        return ModelParams(
            self.config,
            {n: nm.parameter(t.data.astype(dtype), n) for n, t in self.tensors.items()},
        )


def param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    """The full parameter name -> shape map, in canonical (storage) order."""
    d, dff, v, h = cfg.d_model, cfg.d_ff, cfg.vocab_size, cfg.n_heads
    shapes: dict[str, tuple[int, ...]] = {"embedding": (v, d)}
    for i in range(cfg.n_enc_layers):
        p = f"enc.{i}"
        shapes[f"{p}.norm_attn.gain"] = (d,)
        for w in ("wq", "wk", "wv", "wo"):
            shapes[f"{p}.attn.{w}"] = (d, d)
        shapes[f"{p}.norm_ffn.gain"] = (d,)
        shapes[f"{p}.ffn.w1"] = (d, dff)
        shapes[f"{p}.ffn.w2"] = (dff, d)
    shapes["enc.norm_final.gain"] = (d,)
    for i in range(cfg.n_dec_layers):
        p = f"dec.{i}"
        shapes[f"{p}.norm_self.gain"] = (d,)
        for w in ("wq", "wk", "wv", "wo"):
            shapes[f"{p}.self_attn.{w}"] = (d, d)
        shapes[f"{p}.norm_cross.gain"] = (d,)
        for w in ("wq", "wk", "wv", "wo"):
            shapes[f"{p}.cross_attn.{w}"] = (d, d)
        shapes[f"{p}.norm_ffn.gain"] = (d,)
        shapes[f"{p}.ffn.w1"] = (d, dff)
        shapes[f"{p}.ffn.w2"] = (dff, d)
    shapes["dec.norm_final.gain"] = (d,)
    shapes["relpos.enc_self"] = (cfg.rel_pos_buckets, h)
    shapes["relpos.dec_self"] = (cfg.rel_pos_buckets, h)
    shapes["relpos.cross"] = (cfg.rel_pos_buckets, h)
    if not cfg.tie_embeddings:
        shapes["lm_head"] = (v, d)
    return shapes


def init_model(cfg: ModelConfig, seed: int) -> ModelParams:
    """Deterministic init: projections/embeddings ~ N(0, 0.02^2), gains = 1, bias tables = 0."""
    cfg.validate()
    rng = np.random.default_rng(seed)
    tensors: dict[str, Tensor] = {}
    for name, shape in param_shapes(cfg).items():
        if name.endswith(".gain"):
            data = np.ones(shape, dtype=np.float32)
        elif name.startswith("relpos."):
            data = np.zeros(shape, dtype=np.float32)
        else:
            data = rng.normal(0.0, INIT_STD, size=shape).astype(np.float32)
        tensors[name] = nm.parameter(data, name)
    return ModelParams(cfg, tensors)


def relative_position_bucket(
    relative_distance, bidirectional: bool, num_buckets: int, max_distance: int
):
    """Map signed key-minus-query distances to bucket indices.

    Bidirectional: half the buckets encode sign; within a half, small
    distances map one-to-one and larger ones are log-spaced up to
    max_distance, clamping at the half's last bucket. Unidirectional: only
    non-positive distances are bucketed; positive distances get bucket 0.
    """
    rel = np.asarray(relative_distance, dtype=np.int64)
    buckets = np.zeros_like(rel)
    if bidirectional:
        if num_buckets % 2 != 0:
            raise ConfigError(f"bidirectional bucketing needs an even num_buckets, got {num_buckets}")
        half = num_buckets // 2
        buckets = np.where(rel > 0, half, 0)
        pos = np.abs(rel)
    else:
        half = num_buckets
        pos = np.maximum(-rel, 0)
    max_exact = half // 2
    # log-spaced region, computed where pos >= max_exact
    safe = np.maximum(pos, 1)
    large = max_exact + (
        np.log(safe / max_exact) / math.log(max_distance / max_exact) * (half - max_exact)
    ).astype(np.int64)
    large = np.minimum(large, half - 1)
    buckets = buckets + np.where(pos < max_exact, pos, large)
    if np.ndim(relative_distance) == 0:
        return int(buckets)
    return buckets


def _bucket_matrix(n_query: int, n_key: int, bidirectional: bool, cfg: ModelConfig) -> np.ndarray:
    q = np.arange(n_query)[:, None]
    k = np.arange(n_key)[None, :]
    return relative_position_bucket(
        k - q, bidirectional, cfg.rel_pos_buckets, cfg.rel_pos_max_distance
    )


def _relative_bias(params: ModelParams, kind: str, n_query: int, n_key: int) -> Tensor:
    """Bias tensor [1, H, n_query, n_key] gathered from a bucket table."""
    cfg = params.config
    buckets = _bucket_matrix(n_query, n_key, bidirectional=(kind != "dec_self"), cfg=cfg)
    gathered = nm.embedding_gather(buckets.reshape(-1), params[f"relpos.{kind}"])
    bias = nm.reshape(gathered, (n_query, n_key, cfg.n_heads))
    bias = nm.transpose(bias, (2, 0, 1))
    return nm.reshape(bias, (1, cfg.n_heads, n_query, n_key))


def _split_heads(x: Tensor, n_heads: int) -> Tensor:
    b, length, d = x.shape
    x = nm.reshape(x, (b, length, n_heads, d // n_heads))
    return nm.transpose(x, (0, 2, 1, 3))


def _join_heads(x: Tensor) -> Tensor:
    b, h, length, dh = x.shape
    x = nm.transpose(x, (0, 2, 1, 3))
    return nm.reshape(x, (b, length, h * dh))


def _attention(
    params: ModelParams,
    prefix: str,
    query_states: Tensor,
    key_states: Tensor,
    mask_bias: np.ndarray,
    rel_bias: Tensor,
) -> Tensor:
    cfg = params.config
    dh = cfg.d_model // cfg.n_heads
    q = _split_heads(nm.matmul(query_states, params[f"{prefix}.wq"]), cfg.n_heads)
    k = _split_heads(nm.matmul(key_states, params[f"{prefix}.wk"]), cfg.n_heads)
    v = _split_heads(nm.matmul(key_states, params[f"{prefix}.wv"]), cfg.n_heads)
    scores = nm.scale(nm.matmul(q, k, transpose_b=True), 1.0 / math.sqrt(dh))
    scores = nm.add(scores, rel_bias)
    scores = nm.add(scores, Tensor(mask_bias))
    weights = nm.softmax(scores)
    ctx = _join_heads(nm.matmul(weights, v))
    return nm.matmul(ctx, params[f"{prefix}.wo"])


def _key_pad_bias(mask: np.ndarray, dtype) -> np.ndarray:
    """[B, Ls] real-token mask -> [B, 1, 1, Ls] additive bias (0 real, -1e9 pad)."""
    mask = np.asarray(mask)
    return ((1.0 - mask.astype(dtype)) * nm.MASK_BIAS)[:, None, None, :]


def _causal_bias(length: int, dtype) -> np.ndarray:
    upper = np.triu(np.ones((length, length), dtype=dtype), k=1)
    return (upper * nm.MASK_BIAS)[None, None, :, :]


def _ffn(params: ModelParams, prefix: str, x: Tensor) -> Tensor:
    hidden = nm.relu(nm.matmul(x, params[f"{prefix}.w1"]))
    return nm.matmul(hidden, params[f"{prefix}.w2"])


def _maybe_dropout(x: Tensor, cfg: ModelConfig, rng: np.random.Generator | None) -> Tensor:
    if rng is None or cfg.dropout <= 0.0:
        return x
    return nm.dropout(x, cfg.dropout, rng)


def encode_forward(
    params: ModelParams,
    input_ids: np.ndarray,
    input_mask: np.ndarray,
    dropout_rng: np.random.Generator | None = None,
) -> Tensor:
    """Encoder stack: [B, Ls] ids and mask -> hidden states [B, Ls, d_model]."""
    cfg = params.config
    input_ids = np.asarray(input_ids, dtype=np.int64)
    input_mask = np.asarray(input_mask)
    _check_batch("input", input_ids, input_mask, cfg.max_input_len, cfg.vocab_size)
    dtype = params["embedding"].data.dtype
    b, ls = input_ids.shape

    x = nm.embedding_gather(input_ids, params["embedding"])
    pad_bias = _key_pad_bias(input_mask, dtype)
    rel_bias = _relative_bias(params, "enc_self", ls, ls)
    for i in range(cfg.n_enc_layers):
        p = f"enc.{i}"
        h = nm.rms_norm(x, params[f"{p}.norm_attn.gain"])
        attn = _attention(params, f"{p}.attn", h, h, pad_bias, rel_bias)
        x = nm.add(x, _maybe_dropout(attn, cfg, dropout_rng))
        h = nm.rms_norm(x, params[f"{p}.norm_ffn.gain"])
        x = nm.add(x, _maybe_dropout(_ffn(params, f"{p}.ffn", h), cfg, dropout_rng))
    return nm.rms_norm(x, params["enc.norm_final.gain"])


def decode_forward(
    params: ModelParams,
    encoder_states: Tensor,
    input_mask: np.ndarray,
    decoder_input: np.ndarray,
    decoder_mask: np.ndarray,
    dropout_rng: np.random.Generator | None = None,
) -> Tensor:
    """Decoder stack over teacher-forced inputs -> logits [B, Lt, vocab_size].

    `encoder_states` may have batch size 1 with a larger decoder batch; the
    encoder side is then broadcast across decoder rows (used for scoring many
    candidates against one encoded definition).
    """
    cfg = params.config
    decoder_input = np.asarray(decoder_input, dtype=np.int64)
    decoder_mask = np.asarray(decoder_mask)
    _check_batch("decoder", decoder_input, decoder_mask, cfg.max_label_len, cfg.vocab_size)
    dtype = params["embedding"].data.dtype
    b, lt = decoder_input.shape
    ls = encoder_states.shape[1]
    if encoder_states.shape[0] not in (1, b):
        raise ShapeError(
            f"decode_forward: encoder batch {encoder_states.shape[0]} incompatible with decoder batch {b}"
        )
    if input_mask.shape != (encoder_states.shape[0], ls):
        raise ShapeError(
            f"decode_forward: input_mask shape {input_mask.shape} does not match encoder states "
            f"{encoder_states.shape}"
        )

    x = nm.embedding_gather(decoder_input, params["embedding"])
    self_bias = _causal_bias(lt, dtype) + _key_pad_bias(decoder_mask, dtype)
    cross_bias = _key_pad_bias(input_mask, dtype)
    rel_self = _relative_bias(params, "dec_self", lt, lt)
    rel_cross = _relative_bias(params, "cross", lt, ls)
    for i in range(cfg.n_dec_layers):
        p = f"dec.{i}"
        h = nm.rms_norm(x, params[f"{p}.norm_self.gain"])
        attn = _attention(params, f"{p}.self_attn", h, h, self_bias, rel_self)
        x = nm.add(x, _maybe_dropout(attn, cfg, dropout_rng))
        h = nm.rms_norm(x, params[f"{p}.norm_cross.gain"])
        cross = _attention(params, f"{p}.cross_attn", h, encoder_states, cross_bias, rel_cross)
        x = nm.add(x, _maybe_dropout(cross, cfg, dropout_rng))
        h = nm.rms_norm(x, params[f"{p}.norm_ffn.gain"])
        x = nm.add(x, _maybe_dropout(_ffn(params, f"{p}.ffn", h), cfg, dropout_rng))
    x = nm.rms_norm(x, params["dec.norm_final.gain"])
    head = params["embedding"] if cfg.tie_embeddings else params["lm_head"]
    return nm.matmul(x, head, transpose_b=True)


def forward(
    params: ModelParams,
    input_ids: np.ndarray,
    input_mask: np.ndarray,
    decoder_input: np.ndarray,
    decoder_mask: np.ndarray,
    dropout_rng: np.random.Generator | None = None,
) -> Tensor:
    """Full forward pass: next-token logits [B, Lt, vocab_size]."""
    if np.asarray(input_ids).shape[0] != np.asarray(decoder_input).shape[0]:
        raise ShapeError(
            f"forward: encoder batch {np.asarray(input_ids).shape} != decoder batch "
            f"{np.asarray(decoder_input).shape}"
        )
    enc = encode_forward(params, input_ids, input_mask, dropout_rng)
    return decode_forward(params, enc, np.asarray(input_mask), decoder_input, decoder_mask, dropout_rng)


def shift_right(label_ids: np.ndarray, label_mask: np.ndarray, start_id: int = DECODER_START_ID):
    """Teacher forcing inputs: position 0 = start token, position i = labels[i-1]."""
    label_ids = np.asarray(label_ids)
    label_mask = np.asarray(label_mask)
    dec = np.empty_like(label_ids)
    dec[..., 0] = start_id
    dec[..., 1:] = label_ids[..., :-1]
    mask = np.empty_like(label_mask)
    mask[..., 0] = 1
    mask[..., 1:] = label_mask[..., :-1]
    return dec, mask


def _check_batch(side: str, ids: np.ndarray, mask: np.ndarray, max_len: int, vocab_size: int) -> None:
    if ids.ndim != 2:
        raise ShapeError(f"{side} ids must be 2-D [batch, length], got {ids.shape}")
    if mask.shape != ids.shape:
        raise ShapeError(f"{side} mask shape {mask.shape} does not match ids shape {ids.shape}")
    if ids.shape[1] > max_len:
        raise ShapeError(f"{side} length {ids.shape[1]} exceeds configured maximum {max_len}")
    if ids.size and (ids.min() < 0 or ids.max() >= vocab_size):
        raise ShapeError(f"{side} ids out of range for vocab size {vocab_size}")
