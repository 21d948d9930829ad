"""Per-post feature vectors: one token sequence plus eleven numeric columns.

Disclosure hashtags are scrubbed by default before anything is measured,
otherwise a classifier can read the label straight off the tags and has
nothing to say about posts that omit them.
"""

from __future__ import annotations

import csv
import os
import re
import unicodedata
from dataclasses import dataclass

import numpy as np

from .core import Post, Profile, extract_hashtags
from .ingest.records import dumps_line
from .labeling import DEFAULT_TAGS, SponsorHashtagSet
from .textprep import Vocabulary, encode_sequence, normalize_text
from .porter import stem_fixpoint

NUMERIC_FEATURES = (
    "like_count",
    "comment_count",
    "caption_length_chars",
    "hashtag_count",
    "mention_count",
    "tagged_user_count",
    "follower_count",
    "followee_count",
    "biography_length_chars",
    "is_verified",
    "external_url_exists",
)
N_NUMERIC = len(NUMERIC_FEATURES)

TAGS_SEP = "<tags>"
BIO_SEP = "<bio>"

_TAG_WITH_SPACE = re.compile(r"\s*#([A-Za-z0-9_]+)")


class FeatureError(ValueError):
    pass


def scrub_caption(caption: str, tags: SponsorHashtagSet = DEFAULT_TAGS) -> str:
    """Drop disclosure hashtags (exact token, any case) from caption text."""
    removed = False

    def repl(m):
        nonlocal removed
        if m.group(1).lower() in tags:
            removed = True
            return ""
        return m.group(0)

    out = _TAG_WITH_SPACE.sub(repl, caption)
    return out.strip() if removed else out


def _tag_stems(tags):
    return frozenset(stem_fixpoint(t) for t in tags) | frozenset(tags)


def post_tokens(post: Post, profile: Profile, scrub: bool = True,
                tags: SponsorHashtagSet = DEFAULT_TAGS, include_bio: bool = True,
                stopwords=None) -> list[str]:
    """Caption tokens, then hashtag tokens, then biography tokens, with separators."""
    caption = scrub_caption(post.caption, tags) if scrub else post.caption
    hashtags = [h for h in post.hashtags if not (scrub and h in tags)]
    parts = [normalize_text(caption, stopwords), normalize_text(" ".join(hashtags), stopwords)]
    if include_bio:
        parts.append(normalize_text(profile.biography, stopwords))
    if scrub:
        # a bare word equal to a tag (or its stem) would still give the label away
        banned = _tag_stems(tags)
        parts = [[t for t in part if t not in banned] for part in parts]
    toks = parts[0] + [TAGS_SEP] + parts[1]
    if include_bio:
        toks += [BIO_SEP] + parts[2]
    return toks


def numeric_features(post: Post, profile: Profile, scrub: bool = True,
                     tags: SponsorHashtagSet = DEFAULT_TAGS) -> np.ndarray:
    """Raw (unstandardized) numeric columns in :data:`NUMERIC_FEATURES` order."""
    caption = scrub_caption(post.caption, tags) if scrub else post.caption
    hashtags = extract_hashtags(caption)
    return np.array([
        post.like_count,
        post.comment_count,
        len(unicodedata.normalize("NFC", caption)),
        len(hashtags),
        len(post.mentions),
        len(post.tagged_users),
        profile.follower_count,
        profile.followee_count,
        len(unicodedata.normalize("NFC", profile.biography)),
        1.0 if profile.is_verified else 0.0,
        1.0 if profile.external_url else 0.0,
    ], dtype=np.float64)


@dataclass(frozen=True)
class FeatureVector:
    text_sequence: np.ndarray
    numeric: np.ndarray


def extract_features(post: Post, profile: Profile, vocab: Vocabulary, max_len: int,
                     scrub: bool = True, tags: SponsorHashtagSet = DEFAULT_TAGS,
                     include_bio: bool = True) -> FeatureVector:
    if post.author != profile.username:
        raise FeatureError(f"post {post.id} is by {post.author}, not {profile.username}")
    toks = post_tokens(post, profile, scrub, tags, include_bio)
    return FeatureVector(encode_sequence(toks, vocab, max_len), numeric_features(post, profile, scrub, tags))


@dataclass(frozen=True)
class Standardizer:
    """z-score with statistics from the training split; constant columns map to 0."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X) -> "Standardizer":
        X = np.asarray(X, dtype=np.float64)
        mean = X.mean(axis=0)
        return cls(mean, X.std(axis=0))

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        scale = np.where(self.std > 0, self.std, 1.0)
        return (X - self.mean) / scale

    def to_dict(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["mean"], dtype=np.float64), np.asarray(d["std"], dtype=np.float64))


def write_feature_exports(ids, numeric, sequences, out_dir: str | os.PathLike) -> None:
    """Numeric matrix as CSV and encoded sequences as JSONL, for offline inspection."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "numeric.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["post_id", *NUMERIC_FEATURES])
        for pid, row in zip(ids, numeric):
            w.writerow([pid, *(repr(float(v)) for v in row)])
    with open(os.path.join(out_dir, "sequences.jsonl"), "w", encoding="utf-8", newline="\n") as fh:
        for pid, seq in zip(ids, sequences):
            fh.write(dumps_line({"post_id": pid, "sequence": [int(v) for v in seq]}) + "\n")
