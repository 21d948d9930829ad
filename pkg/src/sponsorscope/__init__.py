"""Influencer tiering, engagement analytics and sponsored-post detection."""

from .core import (
    ADVERTISER_CATEGORIES,
    CommentRef,
    Post,
    Profile,
    SponsorLabel,
    Story,
    TierLabel,
    ValidationError,
    extract_hashtags,
    extract_mentions,
)
from .labeling import DEFAULT_TAGS, SponsorHashtagSet, assign_tier, label_post, label_story

__version__ = "0.1.0"

__all__ = [
    "ADVERTISER_CATEGORIES",
    "CommentRef",
    "DEFAULT_TAGS",
    "Post",
    "Profile",
    "SponsorHashtagSet",
    "SponsorLabel",
    "Story",
    "TierLabel",
    "ValidationError",
    "assign_tier",
    "extract_hashtags",
    "extract_mentions",
    "label_post",
    "label_story",
]
