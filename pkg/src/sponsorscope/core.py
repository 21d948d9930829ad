"""Domain types for profiles, posts and stories, plus caption parsing."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field

STORY_LIFETIME_S = 24 * 3600

# Controlled advertiser-category vocabulary for paid-partnership stories.
ADVERTISER_CATEGORIES = (
    "Health/Beauty",
    "Product/Service",
    "Clothing (Brand)",
    "Food & Beverage",
    "Retail Company",
    "Shopping & Retail",
    "Personal Blog",
    "Entertainment",
    "Travel Company",
    "Restaurant",
    "Jewelry/Watches",
    "Cosmetics Store",
    "Fitness",
    "Electronics",
    "Games/Toys",
    "Baby Goods/Kids Goods",
    "Home Decor",
    "Media/News Company",
    "Sports",
    "App Page",
)

_HASHTAG_RE = re.compile(r"#([A-Za-z0-9_]+)")
_MENTION_RE = re.compile(r"@([A-Za-z0-9._]+)")


class ValidationError(ValueError):
    """A record violates a domain invariant."""


class SponsorLabel(str, enum.Enum):
    SPONSORED = "sponsored"
    NON_SPONSORED = "non_sponsored"
    UNLABELED = "unlabeled"


class TierLabel(enum.IntEnum):
    """Influencer tier; integer values give the Mega > Macro > Micro > Nano order."""

    NANO = 0
    MICRO = 1
    MACRO = 2
    MEGA = 3

    @property
    def title(self) -> str:
        return self.name.capitalize()


def _dedup(items):
    seen = set()
    out = []
    for x in items:
        if x not in seen:
            seen.add(x)
            out.append(x)
    return out


def extract_hashtags(caption: str) -> list[str]:
    """Lowercased hashtags in first-appearance order, without the '#'.

    A hashtag is a '#' followed by the longest run of ASCII letters, digits
    and underscores, so ``"#50%off"`` yields ``"50"``.
    """
    return _dedup(m.lower() for m in _HASHTAG_RE.findall(caption))


def extract_mentions(caption: str) -> list[str]:
    """Lowercased mentions in first-appearance order, without the '@'.

    Mid-word '@' is not special-cased: ``"name@host.com"`` yields ``"host.com"``.
    """
    return _dedup(m.lower() for m in _MENTION_RE.findall(caption))


def _check_username(name, what="username"):
    if not isinstance(name, str) or not name or any(c.isspace() for c in name):
        raise ValidationError(f"{what} must be a non-empty string without whitespace")


def _check_count(value, name):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"{name} must be an integer")
    if value < 0:
        raise ValidationError(f"{name} must be ≥ 0")


@dataclass(frozen=True)
class Profile:
    username: str
    follower_count: int
    followee_count: int
    media_count: int
    is_verified: bool = False
    biography: str = ""
    external_url: str | None = None

    def __post_init__(self):
        _check_username(self.username)
        for name in ("follower_count", "followee_count", "media_count"):
            _check_count(getattr(self, name), name)
        if not isinstance(self.is_verified, bool):
            raise ValidationError("is_verified must be a boolean")
        if not isinstance(self.biography, str):
            raise ValidationError("biography must be a string")
        if self.external_url is not None and not isinstance(self.external_url, str):
            raise ValidationError("external_url must be a string or null")


@dataclass(frozen=True)
class CommentRef:
    """Who commented and when; comment text is deliberately not modeled."""

    commenter: str
    taken_at: int

    def __post_init__(self):
        _check_username(self.commenter, "commenter")
        _check_count(self.taken_at, "taken_at")


@dataclass(frozen=True)
class Post:
    id: str
    author: str
    taken_at: int
    caption: str = ""
    like_count: int = 0
    tagged_users: tuple[str, ...] = ()
    comments: tuple[CommentRef, ...] = ()
    sponsor_label: SponsorLabel = SponsorLabel.UNLABELED
    hashtags: tuple[str, ...] = field(init=False, default=())
    mentions: tuple[str, ...] = field(init=False, default=())

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise ValidationError("id must be a non-empty string")
        _check_username(self.author, "username")
        _check_count(self.taken_at, "taken_at")
        if not isinstance(self.caption, str):
            raise ValidationError("caption must be a string")
        _check_count(self.like_count, "like_count")
        object.__setattr__(self, "tagged_users", tuple(self.tagged_users))
        object.__setattr__(self, "comments", tuple(self.comments))
        for u in self.tagged_users:
            _check_username(u, "tagged_users entry")
        for c in self.comments:
            if c.taken_at < self.taken_at:
                raise ValidationError(
                    f"comment by {c.commenter} predates post {self.id}"
                )
        object.__setattr__(self, "sponsor_label", SponsorLabel(self.sponsor_label))
        # hashtags and mentions always come from the caption
        object.__setattr__(self, "hashtags", tuple(extract_hashtags(self.caption)))
        object.__setattr__(self, "mentions", tuple(extract_mentions(self.caption)))

    @property
    def comment_count(self) -> int:
        return len(self.comments)


@dataclass(frozen=True)
class Story:
    id: str
    author: str
    taken_at: int
    paid_partnership: bool = False
    advertiser_category: str | None = None

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise ValidationError("id must be a non-empty string")
        _check_username(self.author, "username")
        _check_count(self.taken_at, "taken_at")
        if not isinstance(self.paid_partnership, bool):
            raise ValidationError("paid_partnership must be a boolean")
        if self.advertiser_category is not None:
            if not self.paid_partnership:
                raise ValidationError(
                    "advertiser_category requires paid_partnership"
                )
            if self.advertiser_category not in ADVERTISER_CATEGORIES:
                raise ValidationError(
                    f"advertiser_category {self.advertiser_category!r} is not a known category"
                )

    @property
    def expires_at(self) -> int:
        return self.taken_at + STORY_LIFETIME_S
