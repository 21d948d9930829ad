"""The original Porter (1980) suffix-stripping stemmer.

Follows the five-step rule tables of the original algorithm, not the later
"Porter2"/Snowball revision: step 2 maps ``abli -> able`` and has no
``logi`` rule. Words of two letters or fewer are returned unchanged.
"""

from __future__ import annotations

from functools import lru_cache

_VOWELS = frozenset("aeiou")


def _is_consonant(w: str, i: int) -> bool:
    ch = w[i]
    if ch in _VOWELS:
        return False
    if ch == "y":
        return i == 0 or not _is_consonant(w, i - 1)
    return True


def _measure(stem: str) -> int:
    """m in the form [C](VC)^m[V]."""
    m = 0
    prev_vowel = False
    for i in range(len(stem)):
        vowel = not _is_consonant(stem, i)
        if prev_vowel and not vowel:
            m += 1
        prev_vowel = vowel
    return m


def _has_vowel(stem: str) -> bool:
    return any(not _is_consonant(stem, i) for i in range(len(stem)))


def _ends_double_consonant(w: str) -> bool:
    return len(w) >= 2 and w[-1] == w[-2] and _is_consonant(w, len(w) - 1)


def _ends_cvc(w: str) -> bool:
    if len(w) < 3:
        return False
    n = len(w)
    return (
        _is_consonant(w, n - 3)
        and not _is_consonant(w, n - 2)
        and _is_consonant(w, n - 1)
        and w[-1] not in "wxy"
    )


def _step1a(w):
    if w.endswith("sses"):
        return w[:-2]
    if w.endswith("ies"):
        return w[:-2]
    if w.endswith("ss"):
        return w
    if w.endswith("s"):
        return w[:-1]
    return w


def _step1b(w):
    if w.endswith("eed"):
        return w[:-1] if _measure(w[:-3]) > 0 else w
    for suffix in ("ed", "ing"):
        if w.endswith(suffix):
            stem = w[: -len(suffix)]
            if not _has_vowel(stem):
                return w
            return _step1b_cleanup(stem)
    return w


def _step1b_cleanup(w):
    if w.endswith(("at", "bl", "iz")):
        return w + "e"
    if _ends_double_consonant(w) and w[-1] not in "lsz":
        return w[:-1]
    if _measure(w) == 1 and _ends_cvc(w):
        return w + "e"
    return w


def _step1c(w):
    if w.endswith("y") and _has_vowel(w[:-1]):
        return w[:-1] + "i"
    return w


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
    "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement", "ment",
    "ent", "ion", "ou", "ism", "ate", "iti", "ous", "ive", "ize",
)


def _longest(w, suffixes):
    best = None
    for s in suffixes:
        key = s if isinstance(s, str) else s[0]
        if w.endswith(key) and (best is None or len(key) > len(best if isinstance(best, str) else best[0])):
            best = s
    return best


def _replace_if_measure(w, table, min_m):
    rule = _longest(w, table)
    if rule is None:
        return w
    suffix, repl = rule
    stem = w[: -len(suffix)]
    return stem + repl if _measure(stem) > min_m else w


def _step4(w):
    suffix = _longest(w, _STEP4)
    if suffix is None:
        return w
    stem = w[: -len(suffix)]
    if _measure(stem) <= 1:
        return w
    if suffix == "ion" and not stem.endswith(("s", "t")):
        return w
    return stem


def _step5(w):
    if w.endswith("e"):
        stem = w[:-1]
        m = _measure(stem)
        if m > 1 or (m == 1 and not _ends_cvc(stem)):
            w = stem
    if _measure(w) > 1 and _ends_double_consonant(w) and w.endswith("l"):
        w = w[:-1]
    return w


@lru_cache(maxsize=65536)
def stem(word: str) -> str:
    """Porter stem of a single lowercase word."""
    if len(word) <= 2:
        return word
    w = _step1a(word)
    w = _step1b(w)
    w = _step1c(w)
    w = _replace_if_measure(w, _STEP2, 0)
    w = _replace_if_measure(w, _STEP3, 0)
    w = _step4(w)
    return _step5(w)


@lru_cache(maxsize=65536)
def stem_fixpoint(word: str) -> str:
    """Apply :func:`stem` until the word stops changing.

    A single Porter pass is not idempotent (``agreed -> agre -> agr``); the
    text normalizer needs a stable form.
    """
    for _ in range(16):
        nxt = stem(word)
        if nxt == word:
            return word
        word = nxt
    return word
