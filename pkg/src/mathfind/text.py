"""Text analysis: tokenization, stopword removal, and suffix stripping.

English-only stemming with the classic Porter measure-based algorithm;
tokens containing digits or non-ASCII letters pass through unstemmed.
Spans always reference bytes of the original input so highlights can slice
the raw document.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

# Fixed 30-word stopword list, applied before stemming.
STOPWORDS = frozenset(
    """a an and are as at be by for from has he in is it its of on that the
    to was were will with this but they have not""".split()
)

MIN_TOKEN_LEN = 2

_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)
_ASCII_ALPHA_RE = re.compile(r"[a-z]+\Z")


@dataclass(frozen=True, slots=True)
class TextToken:
    term: str
    raw_span: tuple[int, int]
    position: int


# --- Porter stemmer --------------------------------------------------------

_VOWELS = frozenset("aeiou")


def _is_cons(word: str, i: int) -> bool:
    ch = word[i]
    if ch in _VOWELS:
        return False
    if ch == "y":
        return i == 0 or not _is_cons(word, i - 1)
    return True


def _measure(stem: str) -> int:
    """Count of vowel-to-consonant transitions: the m of [C](VC)^m[V]."""
    m = 0
    prev_vowel = False
    for i in range(len(stem)):
        cons = _is_cons(stem, i)
        if cons and prev_vowel:
            m += 1
        prev_vowel = not cons
    return m


def _has_vowel(stem: str) -> bool:
    return any(not _is_cons(stem, i) for i in range(len(stem)))


def _ends_double_cons(word: str) -> bool:
    return len(word) >= 2 and word[-1] == word[-2] and _is_cons(word, len(word) - 1)


def _ends_cvc(word: str) -> bool:
    if len(word) < 3:
        return False
    if not (_is_cons(word, len(word) - 3) and not _is_cons(word, len(word) - 2) and _is_cons(word, len(word) - 1)):
        return False
    return word[-1] not in "wxy"


def _replace(word: str, suffix_len: int, new: str) -> str:
    return word[: len(word) - suffix_len] + new


_STEP2 = (
    ("ational", "ate"), ("tional", "tion"), ("enci", "ence"), ("anci", "ance"),
    ("izer", "ize"), ("abli", "able"), ("alli", "al"), ("entli", "ent"),
    ("eli", "e"), ("ousli", "ous"), ("ization", "ize"), ("ation", "ate"),
    ("ator", "ate"), ("alism", "al"), ("iveness", "ive"), ("fulness", "ful"),
    ("ousness", "ous"), ("aliti", "al"), ("iviti", "ive"), ("biliti", "ble"),
)
_STEP3 = (
    ("icate", "ic"), ("ative", ""), ("alize", "al"), ("iciti", "ic"),
    ("ical", "ic"), ("ful", ""), ("ness", ""),
)
_STEP4 = (
    "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement",
    "ment", "ent", "ion", "ou", "ism", "ate", "iti", "ous", "ive", "ize",
)


def stem(word: str) -> str:
    """Porter stem of a lowercase ASCII word; words of length <= 2 are
    returned unchanged."""
    if len(word) <= 2:
        return word

    # step 1a: plurals
    if word.endswith("sses"):
        word = word[:-2]
    elif word.endswith("ies"):
        word = word[:-2]
    elif not word.endswith("ss") and word.endswith("s"):
        word = word[:-1]

    # step 1b: -ed / -ing
    if word.endswith("eed"):
        if _measure(word[:-3]) > 0:
            word = word[:-1]
    else:
        stripped = None
        if word.endswith("ed") and _has_vowel(word[:-2]):
            stripped = word[:-2]
        elif word.endswith("ing") and _has_vowel(word[:-3]):
            stripped = word[:-3]
        if stripped is not None:
            word = stripped
            if word.endswith(("at", "bl", "iz")):
                word += "e"
            elif _ends_double_cons(word) and word[-1] not in "lsz":
                word = word[:-1]
            elif _measure(word) == 1 and _ends_cvc(word):
                word += "e"

    # step 1c: y -> i after a vowel
    if word.endswith("y") and _has_vowel(word[:-1]):
        word = word[:-1] + "i"

    # step 2
    for suffix, new in _STEP2:
        if word.endswith(suffix):
            if _measure(word[: len(word) - len(suffix)]) > 0:
                word = _replace(word, len(suffix), new)
            break

    # step 3
    for suffix, new in _STEP3:
        if word.endswith(suffix):
            if _measure(word[: len(word) - len(suffix)]) > 0:
                word = _replace(word, len(suffix), new)
            break

    # step 4
    for suffix in _STEP4:
        if word.endswith(suffix):
            base = word[: len(word) - len(suffix)]
            if suffix == "ion":
                if base.endswith(("s", "t")) and _measure(base) > 1:
                    word = base
            elif _measure(base) > 1:
                word = base
            break

    # step 5a: final e
    if word.endswith("e"):
        base = word[:-1]
        m = _measure(base)
        if m > 1 or (m == 1 and not _ends_cvc(base)):
            word = base

    # step 5b: -ll
    if word.endswith("ll") and _measure(word) > 1:
        word = word[:-1]

    return word


# --- tokenizer --------------------------------------------------------------


def tokenize_text(input: str) -> list[TextToken]:
    """Split on non-alphanumeric boundaries, lowercase, drop short tokens and
    stopwords, stem.  Spans are byte offsets into the UTF-8 encoding of the
    input."""
    tokens: list[TextToken] = []
    ascii_input = input.isascii()
    cursor_chars = 0
    cursor_bytes = 0
    for match in _WORD_RE.finditer(input):
        raw = match.group()
        lowered = raw.lower()
        if len(lowered) < MIN_TOKEN_LEN or lowered in STOPWORDS:
            continue
        if _ASCII_ALPHA_RE.match(lowered):
            term = stem(lowered)
        else:
            term = lowered
        if ascii_input:
            span = (match.start(), match.end())
        else:
            cursor_bytes += len(input[cursor_chars:match.start()].encode("utf-8"))
            cursor_chars = match.start()
            start_b = cursor_bytes
            cursor_bytes += len(raw.encode("utf-8"))
            cursor_chars = match.end()
            span = (start_b, cursor_bytes)
        tokens.append(TextToken(term, span, len(tokens)))
    return tokens
