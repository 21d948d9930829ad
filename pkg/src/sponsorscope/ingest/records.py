"""JSONL line schemas and the in-memory Dataset container."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from ..core import CommentRef, Post, Profile, SponsorLabel, Story, ValidationError

KINDS = ("profiles", "posts", "stories")


class IngestError(ValueError):
    """Bad input file: malformed line, invariant violation or duplicate id."""


def _require(obj, key):
    if key not in obj:
        raise ValidationError(f"missing field {key!r}")
    return obj[key]


def profile_from_record(obj: dict) -> Profile:
    return Profile(
        username=_require(obj, "username"),
        follower_count=_require(obj, "follower_count"),
        followee_count=_require(obj, "followee_count"),
        media_count=_require(obj, "media_count"),
        is_verified=obj.get("is_verified", False),
        biography=obj.get("biography") or "",
        external_url=obj.get("external_url"),
    )


def post_from_record(obj: dict) -> Post:
    comments = []
    for c in obj.get("comments", []):
        if not isinstance(c, dict):
            raise ValidationError("comments entries must be objects")
        comments.append(CommentRef(_require(c, "username"), _require(c, "taken_at")))
    try:
        label = SponsorLabel(obj.get("sponsor_label", SponsorLabel.UNLABELED.value))
    except ValueError:
        raise ValidationError(f"unknown sponsor_label {obj.get('sponsor_label')!r}") from None
    return Post(
        id=_require(obj, "id"),
        author=_require(obj, "username"),
        taken_at=_require(obj, "taken_at"),
        caption=obj.get("caption") or "",
        like_count=_require(obj, "like_count"),
        tagged_users=tuple(obj.get("tagged_users", ())),
        comments=tuple(comments),
        sponsor_label=label,
    )


def story_from_record(obj: dict) -> Story:
    return Story(
        id=_require(obj, "id"),
        author=_require(obj, "username"),
        taken_at=_require(obj, "taken_at"),
        paid_partnership=obj.get("paid_partnership", False),
        advertiser_category=obj.get("advertiser_category"),
    )


def profile_to_record(p: Profile) -> dict:
    return {
        "username": p.username,
        "follower_count": p.follower_count,
        "followee_count": p.followee_count,
        "media_count": p.media_count,
        "is_verified": p.is_verified,
        "biography": p.biography,
        "external_url": p.external_url,
    }


def post_to_record(p: Post) -> dict:
    rec = {
        "id": p.id,
        "username": p.author,
        "taken_at": p.taken_at,
        "caption": p.caption,
        "like_count": p.like_count,
        "tagged_users": list(p.tagged_users),
        "comments": [{"username": c.commenter, "taken_at": c.taken_at} for c in p.comments],
    }
    if p.sponsor_label is not SponsorLabel.UNLABELED:
        rec["sponsor_label"] = p.sponsor_label.value
    return rec


def story_to_record(s: Story) -> dict:
    return {
        "id": s.id,
        "username": s.author,
        "taken_at": s.taken_at,
        "paid_partnership": s.paid_partnership,
        "advertiser_category": s.advertiser_category,
    }


_PARSERS = {"profiles": profile_from_record, "posts": post_from_record, "stories": story_from_record}
_WRITERS = {"profiles": profile_to_record, "posts": post_to_record, "stories": story_to_record}


def _key(kind, rec):
    return rec.username if kind == "profiles" else rec.id


def dumps_line(obj) -> str:
    """Canonical single-line JSON used for every file this package writes."""
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def parse_records(kind: str, lines, source="<input>") -> list:
    if kind not in _PARSERS:
        raise ValueError(f"unknown record kind {kind!r}")
    parse = _PARSERS[kind]
    out, seen = [], set()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise IngestError(f"{source}: malformed JSON (line {lineno}): {e.msg}") from None
        if not isinstance(obj, dict):
            raise IngestError(f"{source}: expected a JSON object (line {lineno})")
        try:
            rec = parse(obj)
        except (ValidationError, TypeError) as e:
            raise IngestError(f"{e} (line {lineno})") from None
        key = _key(kind, rec)
        if key in seen:
            raise IngestError(f"{source}: duplicate id {key!r} (line {lineno})")
        seen.add(key)
        out.append(rec)
    return out


def read_jsonl(kind: str, path: str | os.PathLike) -> list:
    """Read and validate one JSONL file of profiles, posts or stories."""
    with open(path, encoding="utf-8") as fh:
        return parse_records(kind, fh, source=str(path))


def write_jsonl(kind: str, records, path: str | os.PathLike) -> None:
    to_rec = _WRITERS[kind]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(dumps_line(to_rec(r)) + "\n")


@dataclass
class Dataset:
    profiles: dict[str, Profile] = field(default_factory=dict)
    posts: list[Post] = field(default_factory=list)
    stories: list[Story] = field(default_factory=list)

    def __post_init__(self):
        if not isinstance(self.profiles, dict):
            self.profiles = {p.username: p for p in self.profiles}
        self.validate()

    def validate(self):
        for kind, items in (("post", self.posts), ("story", self.stories)):
            ids = set()
            for it in items:
                if it.id in ids:
                    raise IngestError(f"duplicate {kind} id {it.id!r}")
                ids.add(it.id)
                if it.author not in self.profiles:
                    raise IngestError(f"{kind} {it.id!r} has no profile for author {it.author!r}")

    def canonical(self) -> "Dataset":
        """Same content with every collection ordered by key."""
        return Dataset(
            profiles=dict(sorted(self.profiles.items())),
            posts=sorted(self.posts, key=lambda p: p.id),
            stories=sorted(self.stories, key=lambda s: s.id),
        )

    def posts_by_author(self) -> dict[str, list[Post]]:
        out: dict[str, list[Post]] = {u: [] for u in self.profiles}
        for p in self.posts:
            out[p.author].append(p)
        return out

    def __len__(self):
        return len(self.posts)


def load_dataset(directory: str | os.PathLike) -> Dataset:
    """Load ``profiles.jsonl``, ``posts.jsonl`` and (if present) ``stories.jsonl``."""
    d = Path(directory)
    profiles = read_jsonl("profiles", d / "profiles.jsonl")
    posts = read_jsonl("posts", d / "posts.jsonl") if (d / "posts.jsonl").exists() else []
    stories = read_jsonl("stories", d / "stories.jsonl") if (d / "stories.jsonl").exists() else []
    return Dataset({p.username: p for p in profiles}, posts, stories)


def save_dataset(ds: Dataset, directory: str | os.PathLike) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_jsonl("profiles", ds.profiles.values(), d / "profiles.jsonl")
    write_jsonl("posts", ds.posts, d / "posts.jsonl")
    write_jsonl("stories", ds.stories, d / "stories.jsonl")
