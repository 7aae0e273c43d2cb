"""Text normalization for topic modelling: tokenize, filter, stem, count."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache

from ._resources import load_lines, load_table

_TOKEN_RE = re.compile(r"[a-zà-öø-ÿœæ]+(?:['’][a-zà-öø-ÿœæ]+)*")


def tokenize(text: str) -> list[str]:
    """Lowercase alphabetic tokens; internal apostrophes kept, digits dropped."""
    return _TOKEN_RE.findall(text.lower())


# ---------------------------------------------------------------------------
# Porter stemmer (classic 1980 algorithm)

_VOWELS = "aeiou"


def _is_consonant(word: str, i: int) -> bool:
    ch = word[i]
    if ch in _VOWELS:
        return False
    if ch == "y":
        return i == 0 or not _is_consonant(word, i - 1)
    return True


def _measure(stem: str) -> int:
    """Number of VC sequences in the [C](VC)^m[V] form of the stem."""
    m = 0
    prev_vowel = False
    for i in range(len(stem)):
        if _is_consonant(stem, i):
            if prev_vowel:
                m += 1
            prev_vowel = False
        else:
            prev_vowel = True
    return m


def _contains_vowel(stem: str) -> bool:
    return any(not _is_consonant(stem, i) for i in range(len(stem)))


def _ends_double_consonant(word: str) -> bool:
    return (
        len(word) >= 2
        and word[-1] == word[-2]
        and _is_consonant(word, len(word) - 1)
    )


def _ends_cvc(word: str) -> bool:
    if len(word) < 3:
        return False
    if not (
        _is_consonant(word, len(word) - 3)
        and not _is_consonant(word, len(word) - 2)
        and _is_consonant(word, len(word) - 1)
    ):
        return False
    return word[-1] not in "wxy"


def _replace_suffix(word: str, rules: list[tuple[str, str]], min_measure: int) -> str:
    """Apply the first rule whose suffix matches; the measure condition is
    checked on the stem, and a failed condition still stops the search."""
    for suffix, replacement in rules:
        if word.endswith(suffix):
            stem = word[: -len(suffix)]
            if _measure(stem) > min_measure:
                return stem + replacement
            return word
    return word


_STEP2 = [
    ("ational", "ate"), ("ization", "ize"), ("iveness", "ive"),
    ("fulness", "ful"), ("ousness", "ous"), ("biliti", "ble"),
    ("tional", "tion"), ("entli", "ent"), ("ousli", "ous"),
    ("ation", "ate"), ("alism", "al"), ("aliti", "al"), ("iviti", "ive"),
    ("enci", "ence"), ("anci", "ance"), ("izer", "ize"), ("abli", "able"),
    ("alli", "al"), ("ator", "ate"), ("eli", "e"),
]

_STEP3 = [
    ("icate", "ic"), ("ative", ""), ("alize", "al"), ("iciti", "ic"),
    ("ical", "ic"), ("ful", ""), ("ness", ""),
]

_STEP4 = [
    "ement", "ance", "ence", "able", "ible", "ment", "ant", "ent", "ism",
    "ate", "iti", "ous", "ive", "ize", "ion", "al", "er", "ic", "ou",
]


def porter_stem(token: str) -> str:
    """Stem one lowercase alphabetic token with the Porter algorithm."""
    word = token
    if len(word) <= 2:
        return word

    # step 1a
    if word.endswith("sses"):
        word = word[:-2]
    elif word.endswith("ies"):
        word = word[:-2]
    elif not word.endswith("ss") and word.endswith("s"):
        word = word[:-1]

    # step 1b
    if word.endswith("eed"):
        if _measure(word[:-3]) > 0:
            word = word[:-1]
    else:
        applied = False
        if word.endswith("ed") and _contains_vowel(word[:-2]):
            word = word[:-2]
            applied = True
        elif word.endswith("ing") and _contains_vowel(word[:-3]):
            word = word[:-3]
            applied = True
        if applied:
            if word.endswith(("at", "bl", "iz")):
                word += "e"
            elif _ends_double_consonant(word) and not word.endswith(("l", "s", "z")):
                word = word[:-1]
            elif _measure(word) == 1 and _ends_cvc(word):
                word += "e"

    # step 1c
    if word.endswith("y") and _contains_vowel(word[:-1]):
        word = word[:-1] + "i"

    word = _replace_suffix(word, _STEP2, 0)
    word = _replace_suffix(word, _STEP3, 0)

    # step 4
    for suffix in _STEP4:
        if word.endswith(suffix):
            stem = word[: -len(suffix)]
            if _measure(stem) > 1 and (suffix != "ion" or stem.endswith(("s", "t"))):
                word = stem
            break

    # step 5a
    if word.endswith("e"):
        stem = word[:-1]
        m = _measure(stem)
        if m > 1 or (m == 1 and not _ends_cvc(stem)):
            word = stem

    # step 5b
    if _measure(word) > 1 and _ends_double_consonant(word) and word.endswith("l"):
        word = word[:-1]

    return word


# ---------------------------------------------------------------------------
# Token filtering


@dataclass
class TokenFilterConfig:
    stopwords: set[str]
    removed_phrases: set[str]
    drop_country_terms: bool = True
    min_token_length: int = 1
    _removed_stems: set[str] = field(default_factory=set, repr=False)
    _country_terms: set[str] = field(default_factory=set, repr=False)

    def __post_init__(self):
        if self.min_token_length < 1:
            raise ValueError("min_token_length must be >= 1")
        self._removed_stems = {porter_stem(p) for p in self.removed_phrases}
        if self.drop_country_terms and not self._country_terms:
            self._country_terms = _country_term_set()


@lru_cache(maxsize=1)
def _country_term_set() -> set[str]:
    terms: set[str] = set()
    for name in load_lines("countries.txt"):
        terms.update(tokenize(name))
    demonyms = load_table("demonyms.txt")
    for demonym in demonyms:
        terms.update(tokenize(demonym))
    return terms


@lru_cache(maxsize=1)
def default_filter_config() -> TokenFilterConfig:
    return TokenFilterConfig(
        stopwords=set(load_lines("stopwords.txt")),
        removed_phrases=set(load_lines("removed_phrases.txt")),
    )


def filter_tokens(tokens: list[str], config: TokenFilterConfig) -> list[str]:
    """Drop stopwords, removed phrases (surface or stem match), country terms
    and too-short tokens; keeps order."""
    kept = []
    for token in tokens:
        if len(token) < config.min_token_length:
            continue
        if token in config.stopwords:
            continue
        if token in config.removed_phrases:
            continue
        if porter_stem(_strip_possessive(token)) in config._removed_stems:
            continue
        if config.drop_country_terms and token in config._country_terms:
            continue
        kept.append(token)
    return kept


def _strip_possessive(token: str) -> str:
    return re.sub(r"['’]s?$", "", token)


@dataclass
class StemBag:
    counts: dict[str, int] = field(default_factory=dict)

    def total(self) -> int:
        return sum(self.counts.values())


def preprocess_for_topics(text: str, config: TokenFilterConfig | None = None) -> StemBag:
    """tokenize -> filter -> stem -> count; the fixed composition order."""
    config = config or default_filter_config()
    counts: dict[str, int] = {}
    for token in filter_tokens(tokenize(text), config):
        stem = porter_stem(_strip_possessive(token))
        if stem:
            counts[stem] = counts.get(stem, 0) + 1
    return StemBag(counts)
