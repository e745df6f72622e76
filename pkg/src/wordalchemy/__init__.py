"""Reverse dictionary engine: describe a concept, get the word back.

A compact encoder-decoder transformer is trained from scratch on
word-definition corpora; queries are answered by ranking every headword by
decoder likelihood. The package also ships a database-style lexical-overlap
baseline, the evaluation harness (Acc@k, median rank, multi-seed averaging),
a CLI, and an HTTP API.
"""

from .corpus import (
    CorpusSplits,
    CorpusStats,
    WordDefPair,
    corpus_stats,
    load_description_set,
    parse_dictionary,
    split_corpus,
)
from .estimator import LexicalOverlapBaseline, ReverseDictionaryModel
from .evaluator import (
    EvalReport,
    RankedCandidates,
    compute_metrics,
    evaluate,
    generate,
    lexical_overlap_baseline,
    rank_of_target,
    score_candidates,
)
from .model import ModelConfig, init_model
from .tokenizer import Tokenizer, train_bpe
from .trainer import Checkpoint, TrainConfig, load_checkpoint, save_checkpoint, train

__version__ = "0.1.0"

__all__ = [
    "CorpusSplits",
    "CorpusStats",
    "WordDefPair",
    "corpus_stats",
    "load_description_set",
    "parse_dictionary",
    "split_corpus",
    "LexicalOverlapBaseline",
    "ReverseDictionaryModel",
    "EvalReport",
    "RankedCandidates",
    "compute_metrics",
    "evaluate",
    "generate",
    "lexical_overlap_baseline",
    "rank_of_target",
    "score_candidates",
    "ModelConfig",
    "init_model",
    "Tokenizer",
    "train_bpe",
    "Checkpoint",
    "TrainConfig",
    "load_checkpoint",
    "save_checkpoint",
    "train",
    "__version__",
]
