"""Batching, the AdamW training loop, validation, and checkpointing.

Checkpoints are a bit-exact binary format: magic ``WALC``, a version word, a
length-prefixed canonical JSON header (configs, tokenizer, parameter table,
headword inventory, manifest digest), then the raw little-endian float32
parameter buffers in header order. save -> load -> save round-trips to
identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
import struct
import time
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from . import model as md
from . import numerics as nm
from .corpus import CorpusSplits, serialize_pairs
from .errors import (
    CheckpointError,
    CheckpointMagicError,
    CheckpointTruncatedError,
    CheckpointVersionError,
    ConfigError,
    TrainingDivergedError,
)
from .model import ModelConfig, ModelParams
from .tokenizer import PAD_ID, ExampleConfig, Tokenizer, TrainingExample, make_example

CHECKPOINT_MAGIC = b"WALC"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    max_steps: int | None = None
    n_epochs: int | None = None
    learning_rate: float = 3e-4
    weight_decay: float = 0.01
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    grad_accum_steps: int = 1
    warmup_steps: int = 200
    seed: int = 0
    validate_every: int = 0  # 0 disables the validation carve-out
    use_prefixes: bool = True

    def validate(self) -> None:
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.grad_accum_steps < 1:
            raise ConfigError(f"grad_accum_steps must be >= 1, got {self.grad_accum_steps}")
        if self.warmup_steps < 0:
            raise ConfigError(f"warmup_steps must be >= 0, got {self.warmup_steps}")
        if (self.max_steps is None) == (self.n_epochs is None):
            raise ConfigError("exactly one of max_steps and n_epochs must be set")
        for name in ("max_steps", "n_epochs"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ConfigError(f"{name} must be >= 1, got {v}")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        cfg = cls(**d)
        cfg.validate()
        return cfg


class OptimizerState:
    """Per-parameter first/second moment estimates plus the step counter."""

    def __init__(self, params: ModelParams):
        self.m = {n: np.zeros_like(t.data) for n, t in params.tensors.items()}
        self.v = {n: np.zeros_like(t.data) for n, t in params.tensors.items()}
        self.step = 0


@dataclass
class Batch:
    input_ids: np.ndarray   # int32 [B, Ls]
    input_mask: np.ndarray  # float32 [B, Ls]
    label_ids: np.ndarray   # int32 [B, Lt]
    label_mask: np.ndarray  # float32 [B, Lt]

    def __len__(self) -> int:
        return self.input_ids.shape[0]


def stack_examples(examples: Sequence[TrainingExample]) -> Batch:
    """Stack examples into rectangular arrays, trimmed to the batch's longest row."""
    ls = max(1, max(e.input.n_real() for e in examples))
    lt = max(1, max(e.labels.n_real() for e in examples))
    return Batch(
        input_ids=np.stack([e.input.ids[:ls] for e in examples]),
        input_mask=np.stack([e.input.mask[:ls] for e in examples]),
        label_ids=np.stack([e.labels.ids[:lt] for e in examples]),
        label_mask=np.stack([e.labels.mask[:lt] for e in examples]),
    )


def make_batches(
    examples: Sequence[TrainingExample], batch_size: int, seed: int, epoch: int
) -> Iterator[Batch]:
    """Deterministically shuffled batches; the final short batch is kept."""
    if not examples:
        raise ValueError("make_batches: empty example list")
    order = list(range(len(examples)))
    random.Random(f"batches:{seed}:{epoch}").shuffle(order)
    for start in range(0, len(order), batch_size):
        chunk = [examples[i] for i in order[start:start + batch_size]]
        yield stack_examples(chunk)


def lr_schedule(step: int, cfg: TrainConfig) -> float:
    """Linear warmup over warmup_steps, then constant."""
    if step < 1:
        raise ValueError(f"lr_schedule: step must be >= 1, got {step}")
    if cfg.warmup_steps > 0 and step < cfg.warmup_steps:
        return cfg.learning_rate * step / cfg.warmup_steps
    return cfg.learning_rate


def adamw_step(
    params: ModelParams,
    grads: dict[str, np.ndarray],
    state: OptimizerState,
    cfg: TrainConfig,
    lr_now: float,
) -> None:
    """One decoupled-weight-decay Adam update, in place.

    Weight decay multiplies parameters after the adaptive step; it is never
    added to the gradient.
    """
    state.step += 1
    t = state.step
    b1 = cfg.adam_beta1
    b2 = cfg.adam_beta2
    bias1 = 1.0 - b1 ** t
    bias2 = 1.0 - b2 ** t
    decay_factor = None
    if cfg.weight_decay != 0.0:
        decay_factor = np.float32(1.0 - lr_now * cfg.weight_decay)
    for name, tensor in params.tensors.items():
        g = grads[name]
        nm.check_finite(name, g)
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * np.square(g)
        m_hat = m / bias1
        v_hat = v / bias2
        tensor.data -= np.float32(lr_now) * m_hat / (np.sqrt(v_hat) + np.float32(cfg.adam_epsilon))
        if decay_factor is not None:
            tensor.data *= decay_factor


@dataclass
class TrainLog:
    seed: int
    steps: list[dict] = field(default_factory=list)       # {step, loss, lr, wall_ms}
    validations: list[dict] = field(default_factory=list)  # {step, loss}

    def summary(self) -> dict:
        return {
            "seed": self.seed,
            "n_steps": len(self.steps),
            "final_loss": self.steps[-1]["loss"] if self.steps else None,
            "final_val_loss": self.validations[-1]["loss"] if self.validations else None,
        }

    def to_jsonl(self) -> str:
        lines = [json.dumps(entry, sort_keys=True) for entry in self.steps]
        return "\n".join(lines) + ("\n" if lines else "")


@dataclass
class Checkpoint:
    model_config: ModelConfig
    train_config: TrainConfig
    tokenizer: Tokenizer
    params: ModelParams
    headwords: dict[str, list[str]]
    manifest_digest: str
    train_summary: dict

    def example_config(self) -> ExampleConfig:
        return ExampleConfig(
            max_input_len=self.model_config.max_input_len,
            max_label_len=self.model_config.max_label_len,
            use_prefixes=self.train_config.use_prefixes,
        )

    def digest(self) -> str:
        return hashlib.sha256(save_checkpoint(self)).hexdigest()


def splits_digest(splits: CorpusSplits) -> str:
    """Content digest of a split set, recorded in checkpoints."""
    h = hashlib.sha256()
    for name, pairs in (
        ("train", splits.train),
        ("seen_test", splits.seen_test),
        ("unseen_test", splits.unseen_test),
        ("description_test", splits.description_test),
    ):
        h.update(name.encode())
        h.update(serialize_pairs(pairs).encode("utf-8"))
    h.update(str(splits.seed).encode())
    return h.hexdigest()


def compute_batch_loss(params: ModelParams, batch: Batch) -> nm.Tensor:
    """Teacher-forced cross-entropy over non-pad label positions."""
    dec_ids, dec_mask = md.shift_right(batch.label_ids, batch.label_mask)
    logits = md.forward(params, batch.input_ids, batch.input_mask, dec_ids, dec_mask)
    b, lt, v = logits.shape
    flat = nm.reshape(logits, (b * lt, v))
    labels = batch.label_ids.reshape(-1).astype(np.int64)
    # padded label positions carry PAD_ID and are excluded from the mean
    return nm.cross_entropy(flat, labels, ignore_id=PAD_ID)


def _evaluate_loss(params: ModelParams, examples: Sequence[TrainingExample], batch_size: int) -> float:
    total = 0.0
    n = 0
    for start in range(0, len(examples), batch_size):
        batch = stack_examples(examples[start:start + batch_size])
        loss = compute_batch_loss(params, batch)
        total += float(loss.data) * len(batch)
        n += len(batch)
    return total / n


def train(
    splits: CorpusSplits,
    tok: Tokenizer,
    mcfg: ModelConfig,
    tcfg: TrainConfig,
    log_hook=None,
) -> tuple[Checkpoint, TrainLog]:
    """Run the full optimization loop and return the final checkpoint and log."""
    mcfg.validate()
    tcfg.validate()
    if not splits.train:
        raise ValueError("train: empty train split")
    if mcfg.vocab_size < tok.vocab_size:
        raise ConfigError(
            f"model vocab_size {mcfg.vocab_size} smaller than tokenizer vocab {tok.vocab_size}"
        )

    excfg = ExampleConfig(
        max_input_len=mcfg.max_input_len,
        max_label_len=mcfg.max_label_len,
        use_prefixes=tcfg.use_prefixes,
    )
    examples = [make_example(tok, p, excfg) for p in splits.train]

    val_examples: list[TrainingExample] = []
    if tcfg.validate_every > 0:
        n_val = max(1, len(examples) // 20)
        val_idx = set(random.Random(f"val:{tcfg.seed}").sample(range(len(examples)), n_val))
        val_examples = [examples[i] for i in sorted(val_idx)]
        examples = [e for i, e in enumerate(examples) if i not in val_idx]

    micro_per_epoch = math.ceil(len(examples) / tcfg.batch_size)
    steps_per_epoch = math.ceil(micro_per_epoch / tcfg.grad_accum_steps)
    max_steps = tcfg.max_steps if tcfg.max_steps is not None else tcfg.n_epochs * steps_per_epoch

    params = md.init_model(mcfg, tcfg.seed)
    state = OptimizerState(params)
    log = TrainLog(seed=tcfg.seed)
    t0 = time.monotonic()

    def micro_batches() -> Iterator[Batch]:
        epoch = 0
        while True:
            yield from make_batches(examples, tcfg.batch_size, tcfg.seed, epoch)
            epoch += 1

    stream = micro_batches()
    for step in range(1, max_steps + 1):
        acc_grads: dict[str, np.ndarray] | None = None
        loss_sum = 0.0
        for _ in range(tcfg.grad_accum_steps):
            batch = next(stream)
            with nm.Tape() as tape:
                loss = compute_batch_loss(params, batch)
            loss_value = float(loss.data)
            if not math.isfinite(loss_value):
                raise TrainingDivergedError(step, loss_value)
            loss_sum += loss_value
            grads = nm.backward(tape, loss, params.tensors)
            if acc_grads is None:
                acc_grads = grads
            else:
                for name in acc_grads:
                    acc_grads[name] += grads[name]
        if tcfg.grad_accum_steps > 1:
            for name in acc_grads:
                acc_grads[name] /= tcfg.grad_accum_steps
        lr_now = lr_schedule(step, tcfg)
        adamw_step(params, acc_grads, state, tcfg, lr_now)
        entry = {
            "step": step,
            "loss": loss_sum / tcfg.grad_accum_steps,
            "lr": lr_now,
            "wall_ms": int((time.monotonic() - t0) * 1000),
        }
        log.steps.append(entry)
        if log_hook is not None:
            log_hook(entry)
        if tcfg.validate_every > 0 and val_examples and step % tcfg.validate_every == 0:
            val_loss = _evaluate_loss(params, val_examples, tcfg.batch_size)
            log.validations.append({"step": step, "loss": val_loss})

    ckpt = Checkpoint(
        model_config=mcfg,
        train_config=tcfg,
        tokenizer=tok,
        params=params,
        headwords={lang: list(ws) for lang, ws in splits.headwords.items()},
        manifest_digest=splits_digest(splits),
        train_summary=log.summary(),
    )
    return ckpt, log


# ---------------------------------------------------------------------------
# Checkpoint serialization
# ---------------------------------------------------------------------------

def save_checkpoint(ckpt: Checkpoint) -> bytes:
    names = list(ckpt.params.tensors)
    table = []
    offset = 0
    buffers = []
    for name in names:
        data = np.ascontiguousarray(ckpt.params.tensors[name].data, dtype="<f4")
        table.append({"name": name, "shape": list(data.shape), "offset": offset})
        buffers.append(data.tobytes())
        offset += data.nbytes
    header = {
        "model_config": ckpt.model_config.to_dict(),
        "train_config": ckpt.train_config.to_dict(),
        "tokenizer": ckpt.tokenizer.to_dict(),
        "params": table,
        "headwords": ckpt.headwords,
        "manifest_digest": ckpt.manifest_digest,
        "train_summary": ckpt.train_summary,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":"), ensure_ascii=True).encode("ascii")
    out = bytearray()
    out += CHECKPOINT_MAGIC
    out += struct.pack("<I", CHECKPOINT_VERSION)
    out += struct.pack("<Q", len(header_bytes))
    out += header_bytes
    for buf in buffers:
        out += buf
    return bytes(out)


def load_checkpoint(data: bytes) -> Checkpoint:
    if len(data) < 4 or data[:4] != CHECKPOINT_MAGIC:
        raise CheckpointMagicError(f"bad checkpoint magic {data[:4]!r}")
    if len(data) < 16:
        raise CheckpointTruncatedError("checkpoint shorter than its fixed header")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionError(f"unsupported checkpoint version {version}")
    (header_len,) = struct.unpack_from("<Q", data, 8)
    header_end = 16 + header_len
    if len(data) < header_end:
        raise CheckpointTruncatedError("checkpoint header truncated")
    try:
        header = json.loads(data[16:header_end].decode("ascii"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointTruncatedError(f"unreadable checkpoint header: {e}") from None

    mcfg = ModelConfig.from_dict(header["model_config"])
    tcfg = TrainConfig.from_dict(header["train_config"])
    tok = Tokenizer.from_dict(header["tokenizer"])
    tensors: dict[str, nm.Tensor] = {}
    for entry in header["params"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = header_end + entry["offset"]
        end = start + 4 * count
        if end > len(data):
            raise CheckpointTruncatedError(f"parameter {entry['name']!r} buffer truncated")
        arr = np.frombuffer(data[start:end], dtype="<f4").reshape(shape).copy()
        tensors[entry["name"]] = nm.parameter(arr, entry["name"])
    expected = md.param_shapes(mcfg)
    got = {n: t.data.shape for n, t in tensors.items()}
    if got != {n: tuple(s) for n, s in expected.items()}:
        raise _shape_mismatch_error(expected, got)
    params = ModelParams(mcfg, tensors)
    return Checkpoint(
        model_config=mcfg,
        train_config=tcfg,
        tokenizer=tok,
        params=params,
        headwords={k: list(v) for k, v in header["headwords"].items()},
        manifest_digest=header["manifest_digest"],
        train_summary=header["train_summary"],
    )


def _shape_mismatch_error(expected, got) -> CheckpointError:
    missing = set(expected) - set(got)
    extra = set(got) - set(expected)
    detail = []
    if missing:
        detail.append(f"missing {sorted(missing)[:3]}")
    if extra:
        detail.append(f"unexpected {sorted(extra)[:3]}")
    if not detail:
        detail.append("shape mismatch")
    return CheckpointError("parameter table does not match model config: " + ", ".join(detail))


def save_checkpoint_file(ckpt: Checkpoint, path: str) -> str:
    data = save_checkpoint(ckpt)
    with open(path, "wb") as f:
        f.write(data)
    return hashlib.sha256(data).hexdigest()


def load_checkpoint_file(path: str) -> Checkpoint:
    with open(path, "rb") as f:
        return load_checkpoint(f.read())
