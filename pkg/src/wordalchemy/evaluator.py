"""Candidate ranking, free generation, ranking metrics, and the lexical baseline.

Ranking scores every headword by teacher-forcing its token sequence through
the decoder and taking the mean per-real-token log-probability (length
normalization), so multi-token headwords compete fairly. Ties are broken by
ascending lexicographic word order, which makes every report deterministic.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np

from . import model as md
from .corpus import CorpusSplits, WordDefPair, normalize_query
from .errors import TargetMissingError, UnknownLanguageError
from .tokenizer import EOS_ID, TokenSeq
from .trainer import Checkpoint

SCORE_CHUNK = 256


@dataclass(frozen=True)
class RankedCandidates:
    """Candidates in deterministic rank order (score descending, then word)."""

    words: list[str]
    scores: list[float]
    definition: str
    lang: str

    def __len__(self) -> int:
        return len(self.words)

    def top(self, k: int) -> list[tuple[str, float]]:
        return list(zip(self.words[:k], self.scores[:k]))


@dataclass(frozen=True)
class Metrics:
    median_rank: float
    acc_at_1: float
    acc_at_10: float
    acc_at_100: float
    n_queries: int

    def to_dict(self) -> dict:
        return {
            "median_rank": self.median_rank,
            "acc_at_1": self.acc_at_1,
            "acc_at_10": self.acc_at_10,
            "acc_at_100": self.acc_at_100,
            "n_queries": self.n_queries,
        }


def _rank_order(words: Sequence[str], scores: np.ndarray) -> list[int]:
    """Indices sorted by score descending, ties by ascending word."""
    return sorted(range(len(words)), key=lambda i: (-scores[i], words[i]))


def _log_probs_for_labels(logits: np.ndarray, label_ids: np.ndarray) -> np.ndarray:
    """Per-position log softmax(logits) gathered at the label ids. [B, L]"""
    zmax = logits.max(axis=-1, keepdims=True)
    shifted = logits - zmax
    np.exp(shifted, out=shifted)
    lse = np.log(shifted.sum(axis=-1)) + zmax[..., 0]
    gathered = np.take_along_axis(logits, label_ids[..., None].astype(np.int64), axis=-1)[..., 0]
    return gathered - lse


class CandidateScorer:
    """Reusable scorer over one checkpoint; caches per-language candidate encodings."""

    def __init__(self, ckpt: Checkpoint):
        self.ckpt = ckpt
        self.excfg = ckpt.example_config()
        self._label_cache: dict[tuple[str, ...], list[TokenSeq]] = {}

    def languages(self) -> list[str]:
        return sorted(self.ckpt.headwords)

    def _labels_for(self, words: tuple[str, ...]) -> list[TokenSeq]:
        cached = self._label_cache.get(words)
        if cached is not None:
            return cached
        tok = self.ckpt.tokenizer
        prefix = self.excfg.word_prefix if self.excfg.use_prefixes else None
        labels = [
            tok.encode(w, prefix, self.excfg.max_label_len, append_eos=True) for w in words
        ]
        if len(self._label_cache) < 64:
            self._label_cache[words] = labels
        return labels

    def encode_definition(self, definition: str, lang: str) -> TokenSeq:
        prefix = self.excfg.definition_prefix if self.excfg.use_prefixes else None
        return self.ckpt.tokenizer.encode(
            normalize_query(definition, lang), prefix, self.excfg.max_input_len, append_eos=False
        )

    def score(self, definition: str, lang: str, headwords: Sequence[str] | None = None) -> RankedCandidates:
        if headwords is None:
            if lang not in self.ckpt.headwords:
                raise UnknownLanguageError(lang)
            headwords = self.ckpt.headwords[lang]
        words = tuple(headwords)
        if not words:
            raise ValueError(f"no headwords to rank for lang {lang!r}")

        labels = self._labels_for(words)
        seq = self.encode_definition(definition, lang)
        params = self.ckpt.params
        enc_states = md.encode_forward(params, seq.ids[None, :], seq.mask[None, :])
        enc_mask = seq.mask[None, :]

        scores = np.zeros(len(words), dtype=np.float64)
        order = sorted(range(len(words)), key=lambda i: labels[i].n_real())
        for start in range(0, len(order), SCORE_CHUNK):
            chunk = order[start:start + SCORE_CHUNK]
            width = max(labels[i].n_real() for i in chunk)
            label_ids = np.stack([labels[i].ids[:width] for i in chunk])
            label_mask = np.stack([labels[i].mask[:width] for i in chunk])
            dec_ids, dec_mask = md.shift_right(label_ids, label_mask)
            logits = md.decode_forward(params, enc_states, enc_mask, dec_ids, dec_mask)
            lp = _log_probs_for_labels(logits.data, label_ids)
            totals = (lp * label_mask).sum(axis=1)
            counts = label_mask.sum(axis=1)
            scores[chunk] = totals / counts

        ranked = _rank_order(words, scores)
        return RankedCandidates(
            words=[words[i] for i in ranked],
            scores=[float(scores[i]) for i in ranked],
            definition=definition,
            lang=lang,
        )


def score_candidates(
    ckpt: Checkpoint, definition: str, lang: str, headwords: Sequence[str] | None = None
) -> RankedCandidates:
    """Rank every headword of the query language by decoder likelihood."""
    return CandidateScorer(ckpt).score(definition, lang, headwords)


def generate(ckpt: Checkpoint, definition: str, lang: str = "en", beam_width: int = 1) -> str:
    """Free decoding: greedy when beam_width == 1, otherwise beam search.

    Beam hypotheses are compared by mean per-token log-probability, the same
    length normalization used for candidate scoring.
    """
    if beam_width < 1:
        raise ValueError(f"beam_width must be >= 1, got {beam_width}")
    scorer = CandidateScorer(ckpt)
    seq = scorer.encode_definition(definition, lang)
    params = ckpt.params
    enc_states = md.encode_forward(params, seq.ids[None, :], seq.mask[None, :])
    enc_mask = seq.mask[None, :]
    max_len = ckpt.model_config.max_label_len

    # beams: (ids tuple without start token, total logprob, finished)
    beams: list[tuple[tuple[int, ...], float, bool]] = [((), 0.0, False)]
    for _ in range(max_len):
        expansions: list[tuple[tuple[int, ...], float, bool]] = []
        alive = [b for b in beams if not b[2]]
        if not alive:
            break
        for ids, total, _ in alive:
            dec_ids = np.asarray([(md.DECODER_START_ID,) + ids], dtype=np.int32)
            dec_mask = np.ones_like(dec_ids, dtype=np.float32)
            logits = md.decode_forward(params, enc_states, enc_mask, dec_ids, dec_mask)
            z = logits.data[0, -1]
            zmax = z.max()
            logprobs = z - (zmax + np.log(np.exp(z - zmax).sum()))
            top = np.argsort(-logprobs, kind="stable")[:beam_width]
            for t in top:
                t = int(t)
                expansions.append((ids + (t,), total + float(logprobs[t]), t == EOS_ID))
        done = [b for b in beams if b[2]]
        pool = expansions + done
        pool.sort(key=lambda b: (-(b[1] / len(b[0])), b[0]))
        beams = pool[:beam_width]
        if all(b[2] for b in beams):
            break

    best_ids = beams[0][0]
    text = ckpt.tokenizer.decode(best_ids)
    if scorer.excfg.use_prefixes and text.startswith(scorer.excfg.word_prefix):
        text = text[len(scorer.excfg.word_prefix):]
    return text.strip()


def rank_of_target(ranked: RankedCandidates, target: str) -> int:
    """1-based rank of the target under the deterministic candidate order."""
    try:
        return ranked.words.index(target) + 1
    except ValueError:
        raise TargetMissingError(
            f"target {target!r} not in the candidate list for lang {ranked.lang!r}"
        ) from None


def compute_metrics(ranks: Sequence[int]) -> Metrics:
    """Median rank (mean of the middle two for even counts) and Acc@1/10/100."""
    if not ranks:
        raise ValueError("compute_metrics: empty rank list")
    ordered = sorted(ranks)
    n = len(ordered)
    if n % 2 == 1:
        median = float(ordered[n // 2])
    else:
        median = (ordered[n // 2 - 1] + ordered[n // 2]) / 2.0
    return Metrics(
        median_rank=median,
        acc_at_1=sum(1 for r in ranks if r <= 1) / n,
        acc_at_10=sum(1 for r in ranks if r <= 10) / n,
        acc_at_100=sum(1 for r in ranks if r <= 100) / n,
        n_queries=n,
    )


@dataclass(frozen=True)
class EvalReport:
    seeds: list[int]
    per_seed: list[dict[str, Metrics]]   # one {split_name: Metrics} per checkpoint
    mean: dict[str, dict[str, float]]    # split_name -> averaged metric values

    def to_dict(self) -> dict:
        return {
            "seeds": self.seeds,
            "per_seed": [
                {split: m.to_dict() for split, m in entry.items()} for entry in self.per_seed
            ],
            "mean": self.mean,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def select_queries(pairs: Sequence[WordDefPair], split_name: str, max_queries: int | None) -> list[WordDefPair]:
    """Deterministic query subsample shared by every checkpoint and the baseline."""
    if max_queries is None or len(pairs) <= max_queries:
        return list(pairs)
    rng = random.Random(f"eval-queries:{split_name}:{max_queries}")
    idx = sorted(rng.sample(range(len(pairs)), max_queries))
    return [pairs[i] for i in idx]


def _split_queries(splits: CorpusSplits, max_queries: int | None) -> dict[str, list[WordDefPair]]:
    out = {}
    for name, pairs in (
        ("seen", splits.seen_test),
        ("unseen", splits.unseen_test),
        ("description", splits.description_test),
    ):
        if pairs:
            out[name] = select_queries(pairs, name, max_queries)
    return out


def evaluate(
    ckpts: Sequence[Checkpoint],
    splits: CorpusSplits,
    headwords: dict[str, list[str]] | None = None,
    max_queries: int | None = None,
    dump_file: IO | None = None,
) -> EvalReport:
    """Rank every query of every split with each of the 5 checkpoints and
    report per-seed metrics plus the cross-seed mean."""
    if len(ckpts) != 5:
        raise ValueError(f"evaluation protocol needs 5 seeds (5 checkpoints), got {len(ckpts)}")
    reference = ckpts[0]
    for c in ckpts[1:]:
        if c.model_config != reference.model_config:
            raise ValueError("checkpoints disagree on model config")
        a = {k: v for k, v in c.train_config.to_dict().items() if k != "seed"}
        b = {k: v for k, v in reference.train_config.to_dict().items() if k != "seed"}
        if a != b:
            raise ValueError("checkpoints disagree on train config (beyond seed)")
    if headwords is None:
        headwords = splits.headwords
    queries = _split_queries(splits, max_queries)

    per_seed: list[dict[str, Metrics]] = []
    seeds: list[int] = []
    for ckpt_index, ckpt in enumerate(ckpts):
        scorer = CandidateScorer(ckpt)
        seeds.append(ckpt.train_config.seed)
        entry: dict[str, Metrics] = {}
        for split_name, pairs in queries.items():
            ranks = []
            for pair in pairs:
                if pair.lang not in headwords:
                    raise UnknownLanguageError(pair.lang)
                ranked = scorer.score(pair.definition, pair.lang, headwords[pair.lang])
                r = rank_of_target(ranked, pair.word)
                ranks.append(r)
                if dump_file is not None:
                    dump_file.write(json.dumps({
                        "ckpt": ckpt_index,
                        "seed": ckpt.train_config.seed,
                        "split": split_name,
                        "definition": pair.definition,
                        "target": pair.word,
                        "rank": r,
                        "top10": ranked.words[:10],
                    }, ensure_ascii=False) + "\n")
            entry[split_name] = compute_metrics(ranks)
        per_seed.append(entry)

    mean: dict[str, dict[str, float]] = {}
    for split_name in queries:
        fields = ("median_rank", "acc_at_1", "acc_at_10", "acc_at_100", "n_queries")
        mean[split_name] = {
            f: float(np.mean([getattr(entry[split_name], f) for entry in per_seed])) for f in fields
        }
    return EvalReport(seeds=seeds, per_seed=per_seed, mean=mean)


# ---------------------------------------------------------------------------
# Lexical-overlap baseline (database-driven ranking)
# ---------------------------------------------------------------------------

class LexicalOverlapIndex:
    """tf-idf weighted token overlap against stored train definitions.

    A headword's score for a query is the best overlap of any of its
    definitions: sum over shared unique tokens of idf(token), with
    idf = ln(N / df) computed over the train definitions of the language.
    Headwords with no stored definitions (unseen words) score 0.
    """

    def __init__(self, train_pairs: Sequence[WordDefPair], lang: str, headwords: Sequence[str]):
        defs = [(p.word, frozenset(p.definition.split())) for p in train_pairs if p.lang == lang]
        if not defs:
            raise UnknownLanguageError(lang)
        self.lang = lang
        self.headwords = list(headwords)
        n_docs = len(defs)
        df: dict[str, int] = {}
        for _, tokens in defs:
            for t in tokens:
                df[t] = df.get(t, 0) + 1
        self.idf = {t: math.log(n_docs / c) for t, c in df.items()}
        self.defs_by_word: dict[str, list[frozenset]] = {}
        for word, tokens in defs:
            self.defs_by_word.setdefault(word, []).append(tokens)

    def score(self, definition: str) -> RankedCandidates:
        query = frozenset(normalize_query(definition, self.lang).split())
        scores = np.zeros(len(self.headwords), dtype=np.float64)
        for i, word in enumerate(self.headwords):
            best = 0.0
            for tokens in self.defs_by_word.get(word, ()):
                s = sum(self.idf.get(t, 0.0) for t in query & tokens)
                if s > best:
                    best = s
            scores[i] = best
        ranked = _rank_order(self.headwords, scores)
        return RankedCandidates(
            words=[self.headwords[i] for i in ranked],
            scores=[float(scores[i]) for i in ranked],
            definition=definition,
            lang=self.lang,
        )


def lexical_overlap_baseline(definition: str, splits: CorpusSplits, lang: str) -> RankedCandidates:
    """Rank headwords by tf-idf token overlap with the train definitions."""
    if lang not in splits.headwords:
        raise UnknownLanguageError(lang)
    index = LexicalOverlapIndex(splits.train, lang, splits.headwords[lang])
    return index.score(definition)


def evaluate_baseline(
    splits: CorpusSplits, max_queries: int | None = None
) -> dict[str, dict[str, Metrics]]:
    """Per-language, per-split metrics for the lexical-overlap baseline,
    over the same deterministic query subsets used by evaluate()."""
    queries = _split_queries(splits, max_queries)
    langs = sorted({p.lang for p in splits.train})
    indexes = {lang: LexicalOverlapIndex(splits.train, lang, splits.headwords[lang]) for lang in langs}
    report: dict[str, dict[str, Metrics]] = {}
    for split_name, pairs in queries.items():
        by_lang: dict[str, list[int]] = {}
        for pair in pairs:
            ranked = indexes[pair.lang].score(pair.definition)
            by_lang.setdefault(pair.lang, []).append(rank_of_target(ranked, pair.word))
        report[split_name] = {lang: compute_metrics(rs) for lang, rs in by_lang.items()}
    return report
