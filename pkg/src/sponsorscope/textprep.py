"""Token normalization, vocabulary fitting and fixed-length sequence encoding."""

from __future__ import annotations

import hashlib
import json
import os
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

from .porter import stem_fixpoint

PAD = 0
OOV = 1
RESERVED = 2

STOPWORDS_FILE = "stopwords_en.txt"


@lru_cache(maxsize=1)
def default_stopwords() -> frozenset[str]:
    text = resources.files("sponsorscope.data").joinpath(STOPWORDS_FILE).read_text("utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


def stopwords_sha256() -> str:
    data = resources.files("sponsorscope.data").joinpath(STOPWORDS_FILE).read_bytes()
    return hashlib.sha256(data).hexdigest()


def load_stopwords(path: str | os.PathLike) -> frozenset[str]:
    with open(path, encoding="utf-8") as fh:
        return frozenset(w.strip().lower() for w in fh if w.strip())


def _strip_punct(text: str) -> str:
    return "".join(ch if ch.isalnum() else " " for ch in text)


def normalize_text(text: str, stopwords=None) -> list[str]:
    """Lowercase, blank out punctuation, split, drop stopwords, stem.

    Stems are taken to a fixed point and any stem that is itself a stopword
    is dropped too, so ``normalize_text(" ".join(normalize_text(t)))`` is a
    no-op.
    """
    if stopwords is None:
        stopwords = default_stopwords()
    out = []
    for tok in _strip_punct(text.lower()).split():
        if tok in stopwords:
            continue
        s = stem_fixpoint(tok)
        if s and s not in stopwords:
            out.append(s)
    return out


@dataclass(frozen=True)
class Vocabulary:
    """Token to index map. 0 is padding, 1 is out-of-vocabulary, real tokens start at 2."""

    index: dict[str, int]
    max_size: int

    def __post_init__(self):
        if self.max_size < RESERVED + 1:
            raise ValueError("max_size must be ≥ 3")
        vals = sorted(self.index.values())
        if vals != list(range(RESERVED, RESERVED + len(vals))):
            raise ValueError("vocabulary indices must be contiguous from 2")
        if len(self) > self.max_size:
            raise ValueError("vocabulary exceeds max_size")

    def __len__(self):
        """Size including the two reserved indices; this is the embedding row count."""
        return len(self.index) + RESERVED

    def lookup(self, token: str) -> int:
        return self.index.get(token, OOV)

    def to_json(self) -> str:
        return json.dumps({"max_size": self.max_size, "index": self.index}, ensure_ascii=False,
                          separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "Vocabulary":
        obj = json.loads(text)
        return cls(dict(obj["index"]), int(obj["max_size"]))


def build_vocabulary(corpus, max_size: int) -> Vocabulary:
    """Rank tokens by total frequency, ties broken lexicographically."""
    if max_size < RESERVED + 1:
        raise ValueError("max_size must be ≥ 3")
    counts = Counter()
    for doc in corpus:
        counts.update(doc)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[: max_size - RESERVED]
    return Vocabulary({tok: i + RESERVED for i, (tok, _) in enumerate(ranked)}, max_size)


def encode_sequence(tokens, vocab: Vocabulary, max_len: int) -> np.ndarray:
    """Indices of the last ``max_len`` tokens, left-padded with zeros."""
    if max_len < 1:
        raise ValueError("max_len must be ≥ 1")
    ids = [vocab.lookup(t) for t in tokens][-max_len:]
    out = np.zeros(max_len, dtype=np.int64)
    if ids:
        out[max_len - len(ids):] = ids
    return out
