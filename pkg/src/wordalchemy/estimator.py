"""Scikit-learn style estimators wrapping the reverse-dictionary pipeline.

``ReverseDictionaryModel.fit(X, y)`` takes definitions as X and headwords as
y, trains the subword tokenizer and the encoder-decoder end to end, and
``predict`` / ``rank`` answer free-text queries. ``LexicalOverlapBaseline``
exposes the database-driven ranking behind the same interface, so the two
are interchangeable in pipelines and comparisons.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator

from .corpus import CorpusSplits, WordDefPair, normalize_pair
from .errors import UnknownLanguageError
from .evaluator import CandidateScorer, LexicalOverlapIndex, RankedCandidates, rank_of_target
from .model import ModelConfig
from .tokenizer import MIN_VOCAB_SIZE, bpe_training_text, train_bpe
from .trainer import Checkpoint, TrainConfig, train


def check_text_list(name: str, values) -> list[str]:
    """Validate a 1-D collection of non-empty strings."""
    if isinstance(values, str):
        raise TypeError(f"{name} must be a sequence of strings, not a single string")
    out = list(values)
    if not out:
        raise ValueError(f"{name} must not be empty")
    for i, v in enumerate(out):
        if not isinstance(v, str):
            raise TypeError(f"{name}[{i}] is {type(v).__name__}, expected str")
        if not v.strip():
            raise ValueError(f"{name}[{i}] is empty")
    return out


def check_langs(lang, n: int) -> list[str]:
    """Broadcast a language tag (or validate a per-sample list) to length n."""
    if lang is None:
        lang = "en"
    if isinstance(lang, str):
        return [lang] * n
    langs = check_text_list("lang", lang)
    if len(langs) != n:
        raise ValueError(f"lang has length {len(langs)}, expected {n}")
    return langs


def pairs_from_xy(X, y, lang) -> list[WordDefPair]:
    defs = check_text_list("X", X)
    words = check_text_list("y", y)
    if len(defs) != len(words):
        raise ValueError(f"X and y have different lengths: {len(defs)} != {len(words)}")
    langs = check_langs(lang, len(defs))
    return [normalize_pair(w, d, l) for w, d, l in zip(words, defs, langs)]


def _headwords(pairs: list[WordDefPair]) -> dict[str, list[str]]:
    by_lang: dict[str, set[str]] = {}
    for p in pairs:
        by_lang.setdefault(p.lang, set()).add(p.word)
    return {lang: sorted(ws) for lang, ws in by_lang.items()}


class ReverseDictionaryModel(BaseEstimator):
    """Sequence-to-sequence reverse dictionary trained from scratch.

    Parameters mirror the model and training configuration; fitted state
    lives in ``checkpoint_``. The default sizes favor fast desk-scale fits;
    pass larger values for real corpora.
    """

    def __init__(
        self,
        vocab_size: int = 1024,
        d_model: int = 64,
        n_heads: int = 4,
        d_ff: int = 256,
        n_enc_layers: int = 2,
        n_dec_layers: int = 2,
        max_input_len: int = 64,
        max_label_len: int = 16,
        batch_size: int = 16,
        max_steps: int = 300,
        learning_rate: float = 3e-4,
        weight_decay: float = 0.01,
        warmup_steps: int = 30,
        use_prefixes: bool = True,
        seed: int = 0,
    ):
        self.vocab_size = vocab_size
        self.d_model = d_model
        self.n_heads = n_heads
        self.d_ff = d_ff
        self.n_enc_layers = n_enc_layers
        self.n_dec_layers = n_dec_layers
        self.max_input_len = max_input_len
        self.max_label_len = max_label_len
        self.batch_size = batch_size
        self.max_steps = max_steps
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.warmup_steps = warmup_steps
        self.use_prefixes = use_prefixes
        self.seed = seed

    def fit(self, X, y, lang=None) -> "ReverseDictionaryModel":
        """Train on definitions X and their headwords y."""
        pairs = pairs_from_xy(X, y, lang)
        splits = CorpusSplits(
            train=pairs, seen_test=[], unseen_test=[], description_test=[],
            headwords=_headwords(pairs), seed=self.seed,
        )
        text = bpe_training_text(pairs, include_prefixes=self.use_prefixes)
        tok = train_bpe(text, max(self.vocab_size, MIN_VOCAB_SIZE), seed=self.seed)
        mcfg = ModelConfig(
            vocab_size=tok.vocab_size,
            d_model=self.d_model,
            n_heads=self.n_heads,
            d_ff=self.d_ff,
            n_enc_layers=self.n_enc_layers,
            n_dec_layers=self.n_dec_layers,
            max_input_len=self.max_input_len,
            max_label_len=self.max_label_len,
        )
        tcfg = TrainConfig(
            batch_size=min(self.batch_size, len(pairs)),
            max_steps=self.max_steps,
            learning_rate=self.learning_rate,
            weight_decay=self.weight_decay,
            warmup_steps=self.warmup_steps,
            seed=self.seed,
            use_prefixes=self.use_prefixes,
        )
        ckpt, log = train(splits, tok, mcfg, tcfg)
        self.checkpoint_: Checkpoint = ckpt
        self.train_log_ = log
        self.languages_ = sorted(splits.headwords)
        self._scorer = CandidateScorer(ckpt)
        return self

    def _check_fitted(self) -> CandidateScorer:
        if not hasattr(self, "checkpoint_"):
            raise RuntimeError("this estimator is not fitted; call fit first")
        return self._scorer

    def rank(self, X, lang=None) -> list[RankedCandidates]:
        """Full ranked candidate lists for each query definition."""
        scorer = self._check_fitted()
        defs = check_text_list("X", X)
        langs = check_langs(lang, len(defs))
        for l in langs:
            if l not in self.checkpoint_.headwords:
                raise UnknownLanguageError(l)
        return [scorer.score(d, l) for d, l in zip(defs, langs)]

    def predict(self, X, lang=None) -> list[str]:
        """Best-ranked headword for each query definition."""
        return [r.words[0] for r in self.rank(X, lang)]

    def score(self, X, y, lang=None) -> float:
        """Top-1 accuracy of the target headwords y for queries X."""
        words = check_text_list("y", y)
        ranked = self.rank(X, lang)
        if len(words) != len(ranked):
            raise ValueError(f"X and y have different lengths: {len(ranked)} != {len(words)}")
        hits = sum(1 for r, w in zip(ranked, words) if rank_of_target(r, w) == 1)
        return hits / len(words)


class LexicalOverlapBaseline(BaseEstimator):
    """Database-driven reverse dictionary: tf-idf token overlap ranking."""

    def fit(self, X, y, lang=None) -> "LexicalOverlapBaseline":
        pairs = pairs_from_xy(X, y, lang)
        headwords = _headwords(pairs)
        self.indexes_ = {
            l: LexicalOverlapIndex(pairs, l, headwords[l]) for l in headwords
        }
        self.languages_ = sorted(headwords)
        return self

    def _index(self, lang: str) -> LexicalOverlapIndex:
        if not hasattr(self, "indexes_"):
            raise RuntimeError("this estimator is not fitted; call fit first")
        if lang not in self.indexes_:
            raise UnknownLanguageError(lang)
        return self.indexes_[lang]

    def rank(self, X, lang=None) -> list[RankedCandidates]:
        defs = check_text_list("X", X)
        langs = check_langs(lang, len(defs))
        return [self._index(l).score(d) for d, l in zip(defs, langs)]

    def predict(self, X, lang=None) -> list[str]:
        return [r.words[0] for r in self.rank(X, lang)]

    def score(self, X, y, lang=None) -> float:
        words = check_text_list("y", y)
        ranked = self.rank(X, lang)
        if len(words) != len(ranked):
            raise ValueError(f"X and y have different lengths: {len(ranked)} != {len(words)}")
        hits = sum(1 for r, w in zip(ranked, words) if rank_of_target(r, w) == 1)
        return hits / len(words)
