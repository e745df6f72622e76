"""Shared fixtures: tiny corpora, tokenizers, and checkpoints."""

import sys

import numpy as np
import pytest


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    acceptance = sys.modules.get("test_acceptance")
    results = getattr(acceptance, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for name, status, detail in results:
            line = f"{status}  {name}"
            if detail:
                line += f"  [{detail}]"
            terminalreporter.write_line(line)

from wordalchemy.corpus import CorpusSplits, split_corpus
from wordalchemy.model import ModelConfig, init_model
from wordalchemy.synthcorpus import generate_pairs
from wordalchemy.tokenizer import train_bpe
from wordalchemy.trainer import Checkpoint, TrainConfig, splits_digest, train


def tiny_model_config(vocab_size: int, **overrides) -> ModelConfig:
    base = dict(
        vocab_size=vocab_size, d_model=16, n_heads=2, d_ff=32,
        n_enc_layers=2, n_dec_layers=2, max_input_len=32, max_label_len=12,
    )
    base.update(overrides)
    return ModelConfig(**base)


@pytest.fixture(scope="session")
def tiny_splits() -> CorpusSplits:
    pairs = generate_pairs(40, defs_per_word=2, lang="en", seed=0)
    return split_corpus(pairs, unseen_word_fraction=0.1, seen_sample_size=10, seed=0)


@pytest.fixture(scope="session")
def tiny_tokenizer(tiny_splits):
    text = [p.definition for p in tiny_splits.train] + [p.word for p in tiny_splits.train]
    return train_bpe(text, vocab_size=420, seed=0)


@pytest.fixture(scope="session")
def untrained_checkpoint(tiny_splits, tiny_tokenizer) -> Checkpoint:
    """A checkpoint with freshly initialized weights; deterministic but untrained."""
    mcfg = tiny_model_config(tiny_tokenizer.vocab_size)
    tcfg = TrainConfig(batch_size=8, max_steps=1, warmup_steps=0, seed=0)
    params = init_model(mcfg, seed=0)
    return Checkpoint(
        model_config=mcfg,
        train_config=tcfg,
        tokenizer=tiny_tokenizer,
        params=params,
        headwords={k: list(v) for k, v in tiny_splits.headwords.items()},
        manifest_digest=splits_digest(tiny_splits),
        train_summary={"seed": 0, "n_steps": 0, "final_loss": None, "final_val_loss": None},
    )


@pytest.fixture(scope="session")
def short_trained_checkpoint(tiny_splits, tiny_tokenizer) -> Checkpoint:
    """A briefly trained tiny model (seconds); used where plumbing needs a real run."""
    mcfg = tiny_model_config(tiny_tokenizer.vocab_size)
    tcfg = TrainConfig(batch_size=8, max_steps=25, warmup_steps=5, seed=0, validate_every=10)
    ckpt, _ = train(tiny_splits, tiny_tokenizer, mcfg, tcfg)
    return ckpt
