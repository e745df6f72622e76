"""Deterministic synthetic dictionary corpora for demos and tests.

Words are built from morphemes (optional prefix + root + suffix frame) and
each word's definitions are paraphrase templates filled with the morpheme
glosses, so word forms and meanings are systematically related: a subword
model can generalize to held-out words while pure lexical overlap against
stored definitions cannot. Generation is a pure function of its arguments.
"""

from __future__ import annotations

import random

from .corpus import WordDefPair, normalize_pair

EN_ROOTS = [
    ("aqua", "water"), ("pyro", "fire"), ("litho", "stone"), ("dendro", "trees"),
    ("ornitho", "birds"), ("astro", "stars"), ("chrono", "time"), ("thermo", "heat"),
    ("cryo", "frost"), ("hydro", "rivers"), ("geo", "soil"), ("bio", "living things"),
    ("zoo", "animals"), ("phyto", "plants"), ("myco", "fungus"), ("entomo", "insects"),
    ("ichthyo", "fish"), ("herpeto", "reptiles"), ("ophio", "snakes"), ("arachno", "spiders"),
    ("antho", "flowers"), ("carpo", "fruit"), ("xylo", "wood"), ("petro", "rocks"),
    ("seismo", "earthquakes"), ("nepho", "clouds"), ("aero", "air"), ("anemo", "wind"),
    ("hyeto", "rain"), ("chiono", "snow"), ("helio", "sunlight"), ("seleno", "the moon"),
    ("photo", "light"), ("phono", "sound"), ("chromo", "color"), ("morpho", "shapes"),
    ("kinesio", "motion"), ("baro", "pressure"), ("electro", "electricity"), ("magneto", "magnets"),
    ("biblio", "books"), ("grapho", "handwriting"), ("numero", "numbers"), ("onomato", "names"),
    ("mytho", "legends"), ("oneiro", "dreams"), ("neuro", "nerves"), ("cardio", "the heart"),
    ("dermo", "skin"), ("osteo", "bones"), ("haemo", "blood"), ("gastro", "the stomach"),
    ("opto", "vision"), ("oto", "ears"), ("rhino", "noses"), ("odonto", "teeth"),
]

EN_SUFFIXES = [
    ("logy", ["the study of {x}", "the science of {x}",
              "a branch of knowledge dealing with {x}", "scholarly research into {x}"]),
    ("phile", ["a person who loves {x}", "someone with a strong fondness for {x}",
               "an enthusiast of {x}", "one devoted to {x}"]),
    ("phobia", ["an abnormal fear of {x}", "a persistent dread of {x}",
                "an irrational terror of {x}", "extreme anxiety caused by {x}"]),
    ("graph", ["an instrument that records {x}", "a device for recording {x}",
               "an apparatus that registers {x}", "a machine used to record {x}"]),
    ("meter", ["an instrument for measuring {x}", "a device that measures {x}",
               "a gauge that indicates {x}", "an apparatus used to measure {x}"]),
    ("scope", ["an instrument for observing {x}", "a device used to view {x}",
               "an optical tool for examining {x}", "an apparatus for inspecting {x}"]),
    ("mancy", ["divination by means of {x}", "the art of foretelling the future from {x}",
               "prophecy based on {x}", "fortune telling that interprets {x}"]),
    ("cracy", ["government by {x}", "rule exercised through {x}",
               "a political order dominated by {x}", "a system of power based on {x}"]),
    ("therapy", ["treatment that uses {x}", "a healing practice based on {x}",
                 "a remedy employing {x}", "medical care centered on {x}"]),
    ("genesis", ["the origin of {x}", "the process by which {x} first forms",
                 "the coming into being of {x}", "the earliest development of {x}"]),
    ("vore", ["an animal that feeds on {x}", "a creature that eats {x}",
              "an organism subsisting on {x}", "a feeder that consumes {x}"]),
    ("arium", ["a place where {x} are kept", "an enclosure housing {x}",
               "a building for keeping {x}", "a site that displays {x}"]),
    ("cide", ["a substance that destroys {x}", "an agent that kills {x}",
              "a chemical used to eliminate {x}", "a preparation for exterminating {x}"]),
    ("gram", ["a written record of {x}", "a drawing that represents {x}",
              "a chart summarizing {x}", "a diagram depicting {x}"]),
    ("oid", ["something resembling {x}", "an object shaped like {x}",
             "a form similar to {x}", "a thing that looks like {x}"]),
    ("nomy", ["the classification of {x}", "a set of laws governing {x}",
              "the systematic arrangement of {x}", "rules for organizing {x}"]),
]

EN_PREFIXES = [
    ("proto", "earliest"), ("neo", "new"), ("pseudo", "false"), ("crypto", "hidden"),
    ("mega", "giant"), ("micro", "tiny"), ("paleo", "ancient"), ("hyper", "excessive"),
    ("iso", "uniform"), ("poly", "manifold"),
]

HI_ROOTS = [
    ("जल", "जल"), ("अग्नि", "अग्नि"), ("पक्षी", "पक्षियों"), ("वन", "वनों"),
    ("तारा", "तारों"), ("समय", "समय"), ("पर्वत", "पर्वतों"), ("नदी", "नदियों"),
    ("पुस्तक", "पुस्तकों"), ("स्वप्न", "स्वप्नों"), ("पत्थर", "पत्थरों"), ("वायु", "वायु"),
]

HI_SUFFIXES = [
    ("शास्त्र", ["{x} का अध्ययन", "{x} का विज्ञान", "{x} के विषय में ज्ञान", "{x} की विद्या"]),
    ("प्रेमी", ["{x} से प्रेम करने वाला व्यक्ति", "{x} का शौकीन", "{x} को चाहने वाला", "{x} में रुचि रखने वाला"]),
    ("भय", ["{x} का असामान्य डर", "{x} से लगातार भय", "{x} का अतार्किक आतंक", "{x} से अत्यधिक चिंता"]),
    ("मापक", ["{x} मापने का यंत्र", "{x} को मापने वाला उपकरण", "{x} की माप का साधन", "{x} मापने की मशीन"]),
    ("घर", ["{x} रखने का स्थान", "{x} के लिए बना भवन", "{x} को संजोने की जगह", "{x} का आश्रय"]),
    ("लेख", ["{x} का लिखित विवरण", "{x} को दर्शाने वाला चित्र", "{x} का आरेख", "{x} की रूपरेखा"]),
]


def _vocabulary(lang: str) -> list[tuple[str, str]]:
    """All (word, gloss-phrase) combinations for a language, in fixed order."""
    if lang == "en":
        roots, suffixes, prefixes = EN_ROOTS, EN_SUFFIXES, EN_PREFIXES
    elif lang == "hi":
        roots, suffixes, prefixes = HI_ROOTS, HI_SUFFIXES, []
    else:
        raise ValueError(f"no synthetic morphology for lang {lang!r}")
    combos = []
    for root, gloss in roots:
        for suffix, _ in suffixes:
            combos.append((root + suffix, (None, root, suffix)))
            for prefix, modifier in prefixes:
                combos.append((prefix + root + suffix, (modifier, root, suffix)))
    return combos


def _templates(lang: str, suffix: str) -> list[str]:
    table = EN_SUFFIXES if lang == "en" else HI_SUFFIXES
    for s, templates in table:
        if s == suffix:
            return templates
    raise KeyError(suffix)


def _gloss(lang: str, root: str) -> str:
    table = EN_ROOTS if lang == "en" else HI_ROOTS
    for r, g in table:
        if r == root:
            return g
    raise KeyError(root)


def generate_pairs(
    n_words: int, defs_per_word: int = 4, lang: str = "en", seed: int = 0
) -> list[WordDefPair]:
    """A deterministic synthetic corpus of n_words headwords with
    defs_per_word paraphrased definitions each."""
    combos = _vocabulary(lang)
    if n_words > len(combos):
        raise ValueError(f"at most {len(combos)} synthetic {lang} words available, asked for {n_words}")
    if not (1 <= defs_per_word <= 4):
        raise ValueError("defs_per_word must be between 1 and 4")
    rng = random.Random(f"synthcorpus:{lang}:{seed}")
    chosen = rng.sample(combos, n_words)
    pairs: list[WordDefPair] = []
    for word, (modifier, root, suffix) in chosen:
        x = _gloss(lang, root)
        if modifier is not None:
            x = f"{modifier} {x}"
        templates = _templates(lang, suffix)
        starts = rng.randrange(4)
        for j in range(defs_per_word):
            definition = templates[(starts + j) % 4].format(x=x)
            pairs.append(normalize_pair(word, definition, lang, source="synthetic"))
    return pairs


def overfit_pairs(n_pairs: int = 64, lang: str = "en", seed: int = 0) -> list[WordDefPair]:
    """A small memorization corpus: one definition per word."""
    return generate_pairs(n_pairs, defs_per_word=1, lang=lang, seed=seed)


def bilingual_pairs(n_words_per_lang: int = 32, seed: int = 0) -> list[WordDefPair]:
    """Mixed en + hi corpus with one definition per word, for shared-vocabulary training."""
    return generate_pairs(n_words_per_lang, 1, "en", seed) + generate_pairs(
        n_words_per_lang, 1, "hi", seed
    )
