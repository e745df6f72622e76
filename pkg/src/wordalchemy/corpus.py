"""Corpus ingestion, normalization, and train/test split construction.

The wire format is JSON lines: one UTF-8 object per line with keys
``word``, ``definition``, ``lang`` and optional ``source``. Splits are pure
functions of their inputs and a seed, so the same corpus and seed always
produce byte-identical splits.
"""

from __future__ import annotations

import io
import json
import random
import re
from dataclasses import dataclass
from typing import IO, Iterable

from .errors import ConfigError, CorpusFormatError

_WS_RE = re.compile(r"\s+")


@dataclass(frozen=True)
class WordDefPair:
    """One headword plus one definition in one language."""

    word: str
    definition: str
    lang: str
    source: str | None = None


@dataclass(frozen=True)
class CorpusSplits:
    train: list[WordDefPair]
    seen_test: list[WordDefPair]
    unseen_test: list[WordDefPair]
    description_test: list[WordDefPair]
    headwords: dict[str, list[str]]  # per language, sorted unique headwords
    seed: int

    def languages(self) -> list[str]:
        return sorted(self.headwords)


@dataclass(frozen=True)
class CorpusStats:
    n_pairs: int
    n_unique_words: int
    per_lang: dict[str, tuple[int, int]]  # lang -> (pairs, unique words)


def normalize_text(text: str) -> str:
    """Collapse whitespace runs to single spaces and trim the ends."""
    return _WS_RE.sub(" ", text).strip()


def normalize_query(text: str, lang: str) -> str:
    """Normalize a free-form query the same way corpus definitions are normalized."""
    text = normalize_text(text)
    if lang == "en":
        text = text.lower()
    return text


def normalize_pair(word: str, definition: str, lang: str, source: str | None = None) -> WordDefPair:
    word = normalize_text(word)
    definition = normalize_text(definition)
    lang = lang.strip()
    if lang == "en":
        definition = definition.lower()
    if not word:
        raise ValueError("empty word after normalization")
    if not definition:
        raise ValueError("empty definition after normalization")
    if not lang:
        raise ValueError("empty language tag")
    return WordDefPair(word, definition, lang, source)


def _as_text_lines(source: IO | Iterable[str] | str) -> Iterable[str]:
    if isinstance(source, str):
        return io.StringIO(source)
    if isinstance(source, bytes):
        return io.StringIO(source.decode("utf-8"))
    if isinstance(source, (io.RawIOBase, io.BufferedIOBase)):
        return io.TextIOWrapper(source, encoding="utf-8")
    return source


def parse_dictionary(source: IO | Iterable[str] | str, lang_filter: str | None = None) -> list[WordDefPair]:
    """Parse the JSON-lines corpus format into normalized pairs, in stream order.

    Raises :class:`CorpusFormatError` with the 1-based line number for
    malformed JSON or pairs that normalize to empty strings.
    """
    pairs: list[WordDefPair] = []
    for lineno, line in enumerate(_as_text_lines(source), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise CorpusFormatError(lineno, f"malformed JSON: {e.msg}") from None
        if not isinstance(obj, dict):
            raise CorpusFormatError(lineno, "expected a JSON object")
        try:
            word = obj["word"]
            definition = obj["definition"]
            lang = obj["lang"]
        except KeyError as e:
            raise CorpusFormatError(lineno, f"missing key {e.args[0]!r}") from None
        try:
            pair = normalize_pair(str(word), str(definition), str(lang), obj.get("source"))
        except ValueError as e:
            raise CorpusFormatError(lineno, str(e)) from None
        if lang_filter is not None and pair.lang != lang_filter:
            continue
        pairs.append(pair)
    return pairs


def load_description_set(source: IO | Iterable[str] | str) -> list[WordDefPair]:
    """Load human-written description pairs; same format, never merged into train."""
    return parse_dictionary(source)


def serialize_pairs(pairs: Iterable[WordDefPair]) -> str:
    """Serialize pairs to the JSON-lines corpus format (inverse of parse_dictionary)."""
    lines = []
    for p in pairs:
        obj = {"word": p.word, "definition": p.definition, "lang": p.lang}
        if p.source is not None:
            obj["source"] = p.source
        lines.append(json.dumps(obj, ensure_ascii=False, sort_keys=True))
    return "\n".join(lines) + ("\n" if lines else "")


def split_corpus(
    pairs: list[WordDefPair],
    unseen_word_fraction: float = 0.1,
    seen_sample_size: int = 500,
    seed: int = 0,
) -> CorpusSplits:
    """Hold out a fraction of each language's words (all their pairs) as the
    unseen test set; the rest is train; the seen test set is a sample of
    train pairs that stays in train.
    """
    if not pairs:
        raise ValueError("cannot split an empty corpus")
    if not (0.0 < unseen_word_fraction < 1.0):
        raise ConfigError(f"unseen_word_fraction must be in (0,1), got {unseen_word_fraction}")

    words_by_lang: dict[str, list[str]] = {}
    for p in pairs:
        bucket = words_by_lang.setdefault(p.lang, [])
        bucket.append(p.word)
    unseen_words: set[tuple[str, str]] = set()
    for lang in sorted(words_by_lang):
        unique = sorted(set(words_by_lang[lang]))
        n_unseen = round(len(unique) * unseen_word_fraction)
        if n_unseen < 1 or n_unseen >= len(unique):
            raise ConfigError(
                f"unseen_word_fraction {unseen_word_fraction} leaves no words on one side "
                f"for lang {lang!r} ({len(unique)} unique words)"
            )
        rng = random.Random(f"split:{seed}:{lang}")
        rng.shuffle(unique)
        unseen_words.update((lang, w) for w in unique[:n_unseen])

    train = [p for p in pairs if (p.lang, p.word) not in unseen_words]
    unseen_test = [p for p in pairs if (p.lang, p.word) in unseen_words]
    if seen_sample_size > len(train):
        raise ConfigError(f"seen_sample_size {seen_sample_size} exceeds train size {len(train)}")
    rng = random.Random(f"seen:{seed}")
    seen_idx = sorted(rng.sample(range(len(train)), seen_sample_size))
    seen_test = [train[i] for i in seen_idx]

    headwords: dict[str, list[str]] = {
        lang: sorted(set(ws)) for lang, ws in words_by_lang.items()
    }
    return CorpusSplits(
        train=train,
        seen_test=seen_test,
        unseen_test=unseen_test,
        description_test=[],
        headwords=headwords,
        seed=seed,
    )


def corpus_stats(pairs: Iterable[WordDefPair]) -> CorpusStats:
    per_lang_pairs: dict[str, int] = {}
    per_lang_words: dict[str, set[str]] = {}
    all_words: set[tuple[str, str]] = set()
    n = 0
    for p in pairs:
        n += 1
        per_lang_pairs[p.lang] = per_lang_pairs.get(p.lang, 0) + 1
        per_lang_words.setdefault(p.lang, set()).add(p.word)
        all_words.add((p.lang, p.word))
    return CorpusStats(
        n_pairs=n,
        n_unique_words=len(all_words),
        per_lang={lang: (per_lang_pairs[lang], len(per_lang_words[lang])) for lang in per_lang_pairs},
    )
