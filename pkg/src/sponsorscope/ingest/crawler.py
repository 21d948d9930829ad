"""Hashtag-seeded collection against the fixture API.

Hashtag discovery finds posts and their authors; timeline monitoring then
pulls every profile, post and story for those authors.
"""

from __future__ import annotations

import json
import logging
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from urllib.parse import quote, urlencode

from .records import Dataset, post_from_record, profile_from_record, story_from_record

log = logging.getLogger(__name__)

MAX_SEED_HASHTAGS = 30


class CrawlConfigError(ValueError):
    pass


class CrawlError(RuntimeError):
    """Request failed after all retries; ``context`` names the tag/user and cursor."""

    def __init__(self, msg, context=None):
        super().__init__(msg)
        self.context = context or {}


class NotFound(CrawlError):
    pass


@dataclass(frozen=True)
class CrawlConfig:
    seed_hashtags: tuple[str, ...] = ("ad", "advert", "sponsored", "advertising", "giveaway", "spon", "sponsor")
    page_size: int = 50
    max_pages: int = 1000

    def __post_init__(self):
        tags = tuple(dict.fromkeys(t.lower().lstrip("#") for t in self.seed_hashtags))
        object.__setattr__(self, "seed_hashtags", tags)
        if len(tags) > MAX_SEED_HASHTAGS:
            raise CrawlConfigError(f"hashtag limit {MAX_SEED_HASHTAGS} exceeded ({len(tags)} given)")
        if self.page_size < 1 or self.max_pages < 1:
            raise CrawlConfigError("page_size and max_pages must be positive")


@dataclass
class ApiClient:
    base_url: str
    timeout: float = 10.0
    attempts: int = 3
    backoff: float = 0.2

    def get(self, path: str, params: dict | None = None, context=None):
        url = self.base_url.rstrip("/") + path
        if params:
            url += "?" + urlencode({k: v for k, v in params.items() if v is not None})
        last = None
        for attempt in range(self.attempts):
            try:
                with urllib.request.urlopen(url, timeout=self.timeout) as resp:
                    return json.loads(resp.read().decode("utf-8"))
            except urllib.error.HTTPError as e:
                if e.code == 404:
                    raise NotFound(f"404 for {path}", context) from None
                last = e
                if e.code < 500:
                    break
            except (urllib.error.URLError, OSError, json.JSONDecodeError) as e:
                last = e
            if attempt + 1 < self.attempts:
                time.sleep(self.backoff)
        raise CrawlError(f"GET {path} failed: {last}", context)

    def paged(self, path, page_size, max_pages, context):
        cursor = None
        for _ in range(max_pages):
            ctx = dict(context, cursor=cursor)
            body = self.get(path, {"cursor": cursor, "limit": page_size}, ctx)
            yield from body["items"]
            cursor = body.get("next_cursor")
            if not cursor:
                return


@dataclass
class HashtagCrawl:
    posts: list = field(default_factory=list)
    usernames: list[str] = field(default_factory=list)


def crawl_hashtags(client: ApiClient, crawl: CrawlConfig) -> HashtagCrawl:
    """Collect posts under each seed hashtag (deduplicated by id) and their authors."""
    found = {}
    for tag in crawl.seed_hashtags:
        path = f"/hashtag/{quote(tag, safe='')}/media"
        for rec in client.paged(path, crawl.page_size, crawl.max_pages, {"tag": tag}):
            found.setdefault(rec["id"], rec)
    posts = [post_from_record(found[k]) for k in sorted(found)]
    users = sorted({p.author for p in posts})
    return HashtagCrawl(posts, users)


def _fetch_user(client, user, page_size):
    u = quote(user, safe="")
    profile = profile_from_record(client.get(f"/user/{u}", context={"user": user}))
    posts = [
        post_from_record(r)
        for r in client.paged(f"/user/{u}/media", page_size, 10**9, {"user": user})
    ]
    stories = [story_from_record(r) for r in client.get(f"/user/{u}/stories", context={"user": user})]
    return profile, posts, stories


def crawl_timelines(client: ApiClient, usernames, page_size: int = 50, workers: int = 4):
    """Fetch profile, full post timeline and stories for each user.

    Returns ``(dataset, skipped)`` where ``skipped`` lists users the API did
    not know. Output order is by id regardless of fetch scheduling.
    """
    usernames = sorted(set(usernames))
    if not usernames:
        raise CrawlConfigError("usernames must be non-empty")

    def job(user):
        try:
            return _fetch_user(client, user, page_size)
        except NotFound:
            return None

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(job, usernames))

    profiles, posts, stories, skipped = {}, {}, {}, []
    for user, res in zip(usernames, results):
        if res is None:
            log.warning("skipping unknown user %s", user)
            skipped.append(user)
            continue
        prof, ps, ss = res
        profiles[prof.username] = prof
        posts.update((p.id, p) for p in ps)
        stories.update((s.id, s) for s in ss)
    ds = Dataset(profiles, [posts[k] for k in sorted(posts)], [stories[k] for k in sorted(stories)])
    return ds, skipped


def run_pipeline(crawl: CrawlConfig, client: ApiClient, workers: int = 4):
    """Hashtag discovery followed by timeline monitoring of the discovered authors."""
    found = crawl_hashtags(client, crawl)
    log.info("hashtag crawl: %d posts, %d accounts", len(found.posts), len(found.usernames))
    if not found.usernames:
        return Dataset(), []
    return crawl_timelines(client, found.usernames, crawl.page_size, workers)
