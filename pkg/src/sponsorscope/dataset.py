"""Labeled example sets, class balancing and stratified partitioning.

Examples carry normalized tokens and raw numeric features. Vocabulary and
standardization are fitted later by :class:`Featurizer` on whichever
training portion is in use, so nothing about held-out posts leaks into
the encoding.
"""

from __future__ import annotations

import heapq
import json
import os
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .core import SponsorLabel, TierLabel
from .features import N_NUMERIC, Standardizer, numeric_features, post_tokens
from .ingest.records import Dataset, dumps_line
from .labeling import DEFAULT_TAGS, assign_tier
from .textprep import Vocabulary, build_vocabulary, encode_sequence


class BalanceError(ValueError):
    pass


class SplitError(ValueError):
    pass


@dataclass(frozen=True)
class Example:
    post_id: str
    author: str
    tier: TierLabel
    label: int
    tokens: tuple[str, ...]
    numeric: tuple[float, ...]

    def to_record(self) -> dict:
        return {
            "post_id": self.post_id,
            "author": self.author,
            "tier": self.tier.title,
            "label": self.label,
            "tokens": list(self.tokens),
            "numeric": list(self.numeric),
        }

    @classmethod
    def from_record(cls, obj) -> "Example":
        return cls(
            post_id=obj["post_id"],
            author=obj["author"],
            tier=TierLabel[obj["tier"].upper()],
            label=int(obj["label"]),
            tokens=tuple(obj["tokens"]),
            numeric=tuple(float(v) for v in obj["numeric"]),
        )


@dataclass(frozen=True)
class LabeledSet:
    examples: tuple[Example, ...]
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "examples", tuple(self.examples))
        seen = set()
        for ex in self.examples:
            if ex.label not in (0, 1):
                raise ValueError(f"label of {ex.post_id} must be 0 or 1")
            if ex.post_id in seen:
                raise ValueError(f"duplicate post id {ex.post_id}")
            seen.add(ex.post_id)

    def __len__(self):
        return len(self.examples)

    def __iter__(self):
        return iter(self.examples)

    @property
    def ids(self) -> list[str]:
        return [e.post_id for e in self.examples]

    @property
    def labels(self) -> np.ndarray:
        return np.array([e.label for e in self.examples], dtype=np.int64)

    def class_counts(self) -> tuple[int, int]:
        n1 = sum(e.label for e in self.examples)
        return len(self.examples) - n1, n1

    def subset(self, ids) -> "LabeledSet":
        keep = set(ids)
        return LabeledSet([e for e in self.examples if e.post_id in keep], self.seed)


def build_examples(ds: Dataset, scrub: bool = True, tags=DEFAULT_TAGS, include_bio: bool = True,
                   label_filter=None) -> LabeledSet:
    """One example per labeled post, ordered by post id."""
    out = []
    for p in sorted(ds.posts, key=lambda q: q.id):
        if p.sponsor_label is SponsorLabel.UNLABELED:
            raise ValueError(f"post {p.id} is unlabeled")
        label = 1 if p.sponsor_label is SponsorLabel.SPONSORED else 0
        if label_filter is not None and label != label_filter:
            continue
        prof = ds.profiles[p.author]
        out.append(Example(
            post_id=p.id,
            author=p.author,
            tier=assign_tier(prof),
            label=label,
            tokens=tuple(post_tokens(p, prof, scrub, tags, include_bio)),
            numeric=tuple(numeric_features(p, prof, scrub, tags).tolist()),
        ))
    return LabeledSet(out)


def read_examples(path) -> LabeledSet:
    with open(path, encoding="utf-8") as fh:
        return LabeledSet([Example.from_record(json.loads(line)) for line in fh if line.strip()])


def write_examples(ls: LabeledSet, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for e in ls.examples:
            fh.write(dumps_line(e.to_record()) + "\n")


def undersample_balance(ls: LabeledSet, seed: int) -> LabeledSet:
    """Drop non-sponsored examples until both classes are the same size.

    Removal walks the tiers from Nano up to Mega. Inside a tier it always
    takes from the author with the most remaining non-sponsored posts
    (ties by username), picking which of that author's posts goes at
    random. A first sweep leaves every author at least one post; a second
    sweep, only needed when that is not enough, may empty authors.
    """
    n_neg, n_pos = ls.class_counts()
    if n_pos == 0:
        raise BalanceError("nothing to balance")
    if n_neg == n_pos:
        return LabeledSet(ls.examples, seed)
    if n_neg < n_pos:
        raise BalanceError("sponsored class must be the minority")
    rng = np.random.default_rng(seed)

    by_author: dict[str, list[str]] = defaultdict(list)
    tier_of: dict[str, TierLabel] = {}
    for e in ls.examples:
        if e.label == 0:
            by_author[e.author].append(e.post_id)
            tier_of[e.author] = e.tier
    queues = {}
    for author in sorted(by_author):
        ids = sorted(by_author[author])
        queues[author] = [ids[i] for i in rng.permutation(len(ids))]

    to_remove = n_neg - n_pos
    removed = set()
    for floor in (1, 0):
        for tier in sorted(TierLabel):
            heap = [(-len(q), a) for a, q in queues.items() if tier_of[a] is tier and len(q) > floor]
            heapq.heapify(heap)
            while to_remove and heap:
                negcount, author = heapq.heappop(heap)
                removed.add(queues[author].pop())
                to_remove -= 1
                if -negcount - 1 > floor:
                    heapq.heappush(heap, (negcount + 1, author))
            if not to_remove:
                break
        if not to_remove:
            break
    return LabeledSet([e for e in ls.examples if e.post_id not in removed], seed)


def _class_indices(ls: LabeledSet):
    idx = {0: [], 1: []}
    for i, e in enumerate(ls.examples):
        idx[e.label].append(i)
    return idx


def split_train_test(ls: LabeledSet, test_fraction: float, seed: int):
    """Stratified train/test split; each side keeps input order."""
    if not 0 < test_fraction < 1:
        raise SplitError("test_fraction must be in (0, 1)")
    idx = _class_indices(ls)
    if min(len(v) for v in idx.values()) < 2:
        raise SplitError("need at least 2 examples of each class to split")
    rng = np.random.default_rng(seed)
    test = set()
    for label in (0, 1):
        members = idx[label]
        n_test = int(round(test_fraction * len(members)))
        n_test = min(max(n_test, 1), len(members) - 1)
        perm = rng.permutation(len(members))
        test.update(members[i] for i in perm[:n_test])
    train = [e for i, e in enumerate(ls.examples) if i not in test]
    held = [e for i, e in enumerate(ls.examples) if i in test]
    return LabeledSet(train, seed), LabeledSet(held, seed)


def kfold_partition(ls: LabeledSet, k: int, seed: int) -> list[LabeledSet]:
    """Label-stratified folds whose sizes differ by at most one.

    Each class is shuffled and the two shuffled lists are dealt round-robin
    into the folds as one continuous stream.
    """
    if k < 2:
        raise SplitError("k must be ≥ 2")
    if k > len(ls):
        raise SplitError(f"k={k} exceeds the number of examples ({len(ls)})")
    rng = np.random.default_rng(seed)
    idx = _class_indices(ls)
    stream = []
    for label in (0, 1):
        members = idx[label]
        stream += [members[i] for i in rng.permutation(len(members))]
    assign = {i: pos % k for pos, i in enumerate(stream)}
    folds = [[] for _ in range(k)]
    for i, e in enumerate(ls.examples):
        folds[assign[i]].append(e)
    return [LabeledSet(f, seed) for f in folds]


def write_split_manifest(path, **id_lists) -> None:
    """JSON object of named post-id lists, e.g. ``train=[...], test=[...]``."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump({k: list(v) for k, v in id_lists.items()}, fh, indent=1, ensure_ascii=False)
        fh.write("\n")


def read_split_manifest(path) -> dict[str, list[str]]:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


@dataclass
class Featurizer:
    """Vocabulary plus numeric standardizer, fitted on training examples only."""

    vocab: Vocabulary
    standardizer: Standardizer
    max_len: int
    fitted_on: frozenset = field(default=frozenset(), repr=False)

    @classmethod
    def fit(cls, train: LabeledSet, vocab_size: int = 5000, max_len: int = 60) -> "Featurizer":
        vocab = build_vocabulary((e.tokens for e in train), vocab_size)
        X = np.array([e.numeric for e in train], dtype=np.float64).reshape(-1, N_NUMERIC)
        return cls(vocab, Standardizer.fit(X), max_len, frozenset(train.ids))

    def transform(self, ls) -> tuple[np.ndarray, np.ndarray]:
        exs = list(ls)
        seqs = np.zeros((len(exs), self.max_len), dtype=np.int64)
        for i, e in enumerate(exs):
            seqs[i] = encode_sequence(e.tokens, self.vocab, self.max_len)
        X = np.array([e.numeric for e in exs], dtype=np.float64).reshape(-1, N_NUMERIC)
        return seqs, self.standardizer.transform(X)

    def to_dict(self):
        return {
            "vocab": json.loads(self.vocab.to_json()),
            "standardizer": self.standardizer.to_dict(),
            "max_len": self.max_len,
            "fitted_on": sorted(self.fitted_on),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            Vocabulary.from_json(json.dumps(d["vocab"])),
            Standardizer.from_dict(d["standardizer"]),
            int(d["max_len"]),
            frozenset(d.get("fitted_on", ())),
        )


def save_json(obj, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, ensure_ascii=False, separators=(",", ":"))
        fh.write("\n")
