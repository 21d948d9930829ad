"""Rule-based sponsorship labels, follower tiers and validation sampling."""

from __future__ import annotations

import dataclasses
import math
from collections.abc import Iterable, Sequence

import numpy as np

from .core import Post, Profile, SponsorLabel, Story, TierLabel

DEFAULT_SPONSOR_TAGS = frozenset(
    {"ad", "advert", "sponsored", "advertising", "giveaway", "spon", "sponsor"}
)

MEGA_MIN = 1_000_000
MACRO_MIN = 100_000
NANO_MAX = 10_000


class SponsorHashtagSet(frozenset):
    """Disclosure hashtags; lowercase, no leading '#'."""

    def __new__(cls, tags: Iterable[str] = DEFAULT_SPONSOR_TAGS):
        tags = frozenset(tags)
        if not tags:
            raise ValueError("sponsor hashtag set must not be empty")
        for t in tags:
            if t != t.lower() or t.startswith("#") or not t:
                raise ValueError(f"sponsor tag {t!r} must be lowercase without '#'")
        return super().__new__(cls, tags)


DEFAULT_TAGS = SponsorHashtagSet()


def label_post(post: Post, tags: SponsorHashtagSet = DEFAULT_TAGS) -> SponsorLabel:
    # exact-token match; post.hashtags is already lowercased
    if any(h in tags for h in post.hashtags):
        return SponsorLabel.SPONSORED
    return SponsorLabel.NON_SPONSORED


def label_story(story: Story) -> SponsorLabel:
    return SponsorLabel.SPONSORED if story.paid_partnership else SponsorLabel.NON_SPONSORED


def assign_tier(profile: Profile | int) -> TierLabel:
    """Follower tier. Exactly 10,000 followers counts as Nano."""
    n = profile if isinstance(profile, int) else profile.follower_count
    if n < 0:
        raise ValueError("follower_count must be ≥ 0")
    if n >= MEGA_MIN:
        return TierLabel.MEGA
    if n >= MACRO_MIN:
        return TierLabel.MACRO
    if n > NANO_MAX:
        return TierLabel.MICRO
    return TierLabel.NANO


def label_posts(posts: Sequence[Post], tags: SponsorHashtagSet = DEFAULT_TAGS) -> list[Post]:
    return [dataclasses.replace(p, sponsor_label=label_post(p, tags)) for p in posts]


def draw_validation_sample(
    accounts: Sequence[Profile], fraction: float, seed: int
) -> list[Profile]:
    """Pick ``ceil(fraction * N)`` accounts for manual checking.

    Every account above 10K followers is always included; the remaining
    slots are filled uniformly without replacement from the rest. The
    result can therefore exceed the nominal size when there are many
    large accounts. Output keeps input order.
    """
    if not 0 < fraction <= 1:
        raise ValueError("fraction must be in (0, 1]")
    n = len(accounts)
    if n == 0:
        return []
    target = math.ceil(fraction * n - 1e-12)
    forced = [i for i, a in enumerate(accounts) if a.follower_count > NANO_MAX]
    rest = [i for i, a in enumerate(accounts) if a.follower_count <= NANO_MAX]
    k = max(0, min(len(rest), target - len(forced)))
    rng = np.random.default_rng(seed)
    picked = rng.choice(len(rest), size=k, replace=False) if k else []
    chosen = set(forced) | {rest[j] for j in picked}
    return [accounts[i] for i in sorted(chosen)]
