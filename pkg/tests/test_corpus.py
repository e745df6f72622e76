"""Tests for corpus parsing, normalization, splits, and stats."""

import io
import json

import pytest

from wordalchemy.corpus import (
    WordDefPair,
    corpus_stats,
    load_description_set,
    normalize_query,
    parse_dictionary,
    serialize_pairs,
    split_corpus,
)
from wordalchemy.errors import ConfigError, CorpusFormatError


def jsonl(*objs):
    return "\n".join(json.dumps(o, ensure_ascii=False) for o in objs) + "\n"


STUDIO = {
    "word": "studio",
    "definition": "workplace consisting of a room or building where movies are made",
    "lang": "en",
}


def make_pairs(n_words, defs_per_word, lang="en"):
    return [
        WordDefPair(f"word{w:04d}", f"definition text number {w} variant {d}", lang)
        for w in range(n_words)
        for d in range(defs_per_word)
    ]


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def test_parse_single_line():
    pairs = parse_dictionary(jsonl(STUDIO))
    assert pairs == [
        WordDefPair("studio", "workplace consisting of a room or building where movies are made", "en")
    ]


def test_parse_from_byte_stream():
    stream = io.BytesIO(jsonl(STUDIO).encode("utf-8"))
    assert parse_dictionary(stream)[0].word == "studio"


def test_parse_preserves_order_at_scale():
    lines = jsonl(*({"word": f"w{i}", "definition": f"def {i}", "lang": "en"} for i in range(20000)))
    pairs = parse_dictionary(lines)
    assert len(pairs) == 20000
    assert [p.word for p in pairs] == [f"w{i}" for i in range(20000)]


def test_parse_normalizes_whitespace_and_case():
    line = jsonl({"word": "  Night   Sky ", "definition": "The  Dark\tVault\nAbove", "lang": "en"})
    (pair,) = parse_dictionary(line)
    assert pair.word == "Night Sky"          # headwords keep their case
    assert pair.definition == "the dark vault above"  # en definitions are lowercased


def test_parse_leaves_devanagari_untouched():
    line = jsonl({"word": "जलशास्त्र", "definition": "जल का अध्ययन", "lang": "hi"})
    (pair,) = parse_dictionary(line)
    assert pair.definition == "जल का अध्ययन"


def test_empty_word_error_carries_line_number():
    with pytest.raises(CorpusFormatError, match="line 1") as exc:
        parse_dictionary(jsonl({"word": "", "definition": "x", "lang": "en"}))
    assert exc.value.line == 1


def test_malformed_json_error_carries_line_number():
    text = jsonl(STUDIO) + "{not json}\n"
    with pytest.raises(CorpusFormatError, match="line 2"):
        parse_dictionary(text)


def test_missing_key_is_reported():
    with pytest.raises(CorpusFormatError, match="definition"):
        parse_dictionary(jsonl({"word": "x", "lang": "en"}))


def test_lang_filter_skips_other_languages():
    text = jsonl(STUDIO, {"word": "जल", "definition": "पानी", "lang": "hi"})
    assert [p.lang for p in parse_dictionary(text)] == ["en", "hi"]
    assert [p.lang for p in parse_dictionary(text, lang_filter="hi")] == ["hi"]


def test_blank_lines_are_skipped():
    text = "\n" + jsonl(STUDIO) + "\n\n"
    assert len(parse_dictionary(text)) == 1


def test_serialize_parse_identity():
    pairs = parse_dictionary(jsonl(
        STUDIO, {"word": "जल", "definition": "पानी जैसा द्रव", "lang": "hi", "source": "wn"}
    ))
    assert parse_dictionary(serialize_pairs(pairs)) == pairs


# ---------------------------------------------------------------------------
# description set
# ---------------------------------------------------------------------------

def test_load_description_set():
    (pair,) = load_description_set(
        jsonl({"word": "forget", "definition": "To be unable to remember something", "lang": "en"})
    )
    assert pair == WordDefPair("forget", "to be unable to remember something", "en")


def test_load_description_set_empty_stream():
    assert load_description_set("") == []


def test_description_duplicates_are_accepted():
    line = {"word": "forget", "definition": "to be unable to remember something", "lang": "en"}
    assert len(load_description_set(jsonl(line, line))) == 2


# ---------------------------------------------------------------------------
# splits
# ---------------------------------------------------------------------------

def test_split_holds_out_exact_word_fraction():
    pairs = make_pairs(100, 10)
    splits = split_corpus(pairs, unseen_word_fraction=0.1, seen_sample_size=50, seed=42)
    unseen_words = {p.word for p in splits.unseen_test}
    assert len(unseen_words) == 10
    assert len(splits.unseen_test) == 100  # all 10 defs of each held-out word
    assert len(splits.train) == 900


def test_split_word_level_disjointness_brute_force():
    pairs = make_pairs(60, 4)
    splits = split_corpus(pairs, 0.25, seen_sample_size=20, seed=3)
    train_words = {p.word for p in splits.train}
    for p in splits.unseen_test:
        assert p.word not in train_words
    train_set = {(p.word, p.definition) for p in splits.train}
    for p in splits.unseen_test:
        assert (p.word, p.definition) not in train_set


def test_seen_test_is_subset_of_train():
    pairs = make_pairs(50, 3)
    splits = split_corpus(pairs, 0.2, seen_sample_size=30, seed=1)
    train_set = {(p.word, p.definition) for p in splits.train}
    assert len(splits.seen_test) == 30
    for p in splits.seen_test:
        assert (p.word, p.definition) in train_set


def test_split_is_deterministic():
    pairs = make_pairs(80, 5)
    a = split_corpus(pairs, 0.1, 40, seed=7)
    b = split_corpus(pairs, 0.1, 40, seed=7)
    assert serialize_pairs(a.train) == serialize_pairs(b.train)
    assert serialize_pairs(a.unseen_test) == serialize_pairs(b.unseen_test)
    assert serialize_pairs(a.seen_test) == serialize_pairs(b.seen_test)
    c = split_corpus(pairs, 0.1, 40, seed=8)
    assert serialize_pairs(a.unseen_test) != serialize_pairs(c.unseen_test)


def test_headwords_cover_every_split():
    pairs = make_pairs(40, 2) + make_pairs(30, 2, lang="hi")
    splits = split_corpus(pairs, 0.1, 20, seed=0)
    for split in (splits.train, splits.seen_test, splits.unseen_test):
        for p in split:
            assert p.word in splits.headwords[p.lang]
    for lang, words in splits.headwords.items():
        assert words == sorted(set(words))


def test_split_per_language_holdout():
    pairs = make_pairs(40, 2) + make_pairs(20, 2, lang="hi")
    splits = split_corpus(pairs, 0.25, 10, seed=0)
    unseen_by_lang = {}
    for p in splits.unseen_test:
        unseen_by_lang.setdefault(p.lang, set()).add(p.word)
    assert len(unseen_by_lang["en"]) == 10
    assert len(unseen_by_lang["hi"]) == 5


def test_split_rejects_bad_fraction():
    pairs = make_pairs(10, 2)
    for bad in (0.0, 1.0, -0.5, 1.5):
        with pytest.raises(ConfigError):
            split_corpus(pairs, bad, 5, seed=0)


def test_split_rejects_empty_corpus():
    with pytest.raises(ValueError):
        split_corpus([], 0.1, 5, seed=0)


def test_split_rejects_oversized_seen_sample():
    pairs = make_pairs(10, 1)
    with pytest.raises(ConfigError):
        split_corpus(pairs, 0.1, 100, seed=0)


# ---------------------------------------------------------------------------
# stats
# ---------------------------------------------------------------------------

def test_stats_empty():
    stats = corpus_stats([])
    assert stats.n_pairs == 0 and stats.n_unique_words == 0


def test_stats_shared_word():
    pairs = [WordDefPair("w", "a", "en"), WordDefPair("w", "b", "en")]
    stats = corpus_stats(pairs)
    assert (stats.n_pairs, stats.n_unique_words) == (2, 1)


def test_stats_per_lang_sums_match_independent_recount():
    pairs = make_pairs(17, 3) + make_pairs(11, 2, lang="hi") + make_pairs(5, 4, lang="mr")
    stats = corpus_stats(pairs)
    # independent recount with plain dict/set passes
    n_by_lang = {}
    words_by_lang = {}
    for p in pairs:
        n_by_lang[p.lang] = n_by_lang.get(p.lang, 0) + 1
        words_by_lang.setdefault(p.lang, set()).add(p.word)
    assert stats.n_pairs == sum(n_by_lang.values())
    for lang in n_by_lang:
        assert stats.per_lang[lang] == (n_by_lang[lang], len(words_by_lang[lang]))
    assert stats.n_unique_words == sum(len(v) for v in words_by_lang.values())


def test_normalize_query():
    assert normalize_query("  Covered   WITH water ", "en") == "covered with water"
    assert normalize_query(" जल  का अध्ययन ", "hi") == "जल का अध्ययन"
