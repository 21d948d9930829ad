"""Engagement statistics per tier and sponsorship label, with CSV export.

Latencies are reported in minutes. Accounts with zero followers are left
out of follower-normalized figures and counted in ``excluded_zero_followers``.
"""

from __future__ import annotations

import csv
import os
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import SponsorLabel, TierLabel
from .ingest.records import Dataset
from .labeling import assign_tier, label_story


class AnalyticsError(ValueError):
    pass


def cdf(values) -> list[tuple[float, float]]:
    """Empirical CDF over the distinct observed values: ``[(x, P(X <= x)), ...]``."""
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        raise AnalyticsError("empty sample")
    if not np.all(np.isfinite(arr)):
        raise AnalyticsError("sample contains non-finite values")
    xs, counts = np.unique(arr, return_counts=True)
    cum = np.cumsum(counts)
    n = arr.size
    return [(float(x), int(c) / n) for x, c in zip(xs, cum)]


def _median(values):
    if not values:
        return None
    return float(np.median(np.asarray(values, dtype=float)))


def _labeled_posts(ds: Dataset):
    for p in ds.posts:
        if p.sponsor_label is SponsorLabel.UNLABELED:
            raise AnalyticsError(f"post {p.id} is unlabeled; run labeling first")
        yield p


GroupKey = tuple[TierLabel, SponsorLabel]


def _group_sort_key(key):
    tier, label = key
    return (-int(tier), label.value)


@dataclass(frozen=True)
class EngagementSummary:
    tier: TierLabel
    label: SponsorLabel
    post_count: int
    comment_counts: tuple[int, ...]
    like_counts: tuple[int, ...]
    comments_normalized: tuple[float, ...]
    likes_normalized: tuple[float, ...]
    excluded_zero_followers: int = 0

    @property
    def group(self) -> str:
        return f"{self.tier.title}/{self.label.value}"

    @property
    def median_comments(self):
        return _median(self.comment_counts)

    @property
    def median_likes(self):
        return _median(self.like_counts)


def engagement_summary(ds: Dataset) -> list[EngagementSummary]:
    groups: dict[GroupKey, list] = defaultdict(list)
    for p in _labeled_posts(ds):
        prof = ds.profiles[p.author]
        groups[(assign_tier(prof), p.sponsor_label)].append((p, prof))
    out = []
    for key in sorted(groups, key=_group_sort_key):
        items = sorted(groups[key], key=lambda pp: pp[0].id)
        kept = [(p, prof) for p, prof in items if prof.follower_count > 0]
        out.append(EngagementSummary(
            tier=key[0],
            label=key[1],
            post_count=len(items),
            comment_counts=tuple(p.comment_count for p, _ in items),
            like_counts=tuple(p.like_count for p, _ in items),
            comments_normalized=tuple(p.comment_count / pr.follower_count for p, pr in kept),
            likes_normalized=tuple(p.like_count / pr.follower_count for p, pr in kept),
            excluded_zero_followers=len(items) - len(kept),
        ))
    return out


@dataclass(frozen=True)
class LatencyStats:
    latencies_min: tuple[float, ...]
    median_min: float | None


def comment_latency_stats(ds: Dataset) -> dict[GroupKey, LatencyStats]:
    """Minutes from post to each comment, grouped by (tier, label)."""
    groups: dict[GroupKey, list[float]] = {}
    for p in _labeled_posts(ds):
        key = (assign_tier(ds.profiles[p.author]), p.sponsor_label)
        bucket = groups.setdefault(key, [])
        for c in p.comments:
            if c.taken_at < p.taken_at:
                raise AnalyticsError(f"comment predates post {p.id}")
            bucket.append((c.taken_at - p.taken_at) / 60.0)
    out = {}
    for key in sorted(groups, key=_group_sort_key):
        lat = tuple(sorted(groups[key]))
        out[key] = LatencyStats(lat, _median(lat))
    return out


@dataclass(frozen=True)
class RepeatStats:
    username: str
    tier: TierLabel
    comments_per_user: dict[str, int]

    @property
    def repeat_fraction(self) -> float | None:
        n = len(self.comments_per_user)
        if n == 0:
            return None
        return sum(1 for c in self.comments_per_user.values() if c > 1) / n


def repeat_commenter_stats(ds: Dataset) -> dict[str, RepeatStats]:
    """Per influencer: how many comments each distinct commenter left across their posts."""
    counts: dict[str, Counter] = {u: Counter() for u in ds.profiles}
    for p in _labeled_posts(ds):
        counts[p.author].update(c.commenter for c in p.comments)
    return {
        u: RepeatStats(u, assign_tier(ds.profiles[u]), dict(sorted(counts[u].items())))
        for u in sorted(counts)
    }


def pooled_repeat_fraction(stats: dict[str, RepeatStats], tier: TierLabel | None = None):
    """Fraction of (influencer, commenter) pairs with more than one comment."""
    n = rep = 0
    for s in stats.values():
        if tier is not None and s.tier is not tier:
            continue
        n += len(s.comments_per_user)
        rep += sum(1 for c in s.comments_per_user.values() if c > 1)
    return rep / n if n else None


@dataclass(frozen=True)
class AccountShare:
    username: str
    tier: TierLabel
    sponsored_posts: int
    total_posts: int
    sponsored_stories: int
    total_stories: int

    @property
    def post_share(self):
        return self.sponsored_posts / self.total_posts if self.total_posts else None

    @property
    def story_share(self):
        return self.sponsored_stories / self.total_stories if self.total_stories else None


@dataclass(frozen=True)
class ShareReport:
    accounts: dict[str, AccountShare]
    global_post_share: float
    global_story_share: float
    no_posts: tuple[str, ...] = field(default=())

    def per_account_post_shares(self) -> dict[str, float]:
        return {u: a.post_share for u, a in self.accounts.items() if a.total_posts}


def sponsored_share(ds: Dataset) -> ShareReport:
    sp = Counter()
    tot = Counter()
    for p in _labeled_posts(ds):
        tot[p.author] += 1
        sp[p.author] += p.sponsor_label is SponsorLabel.SPONSORED
    ssp = Counter()
    stot = Counter()
    for s in ds.stories:
        stot[s.author] += 1
        ssp[s.author] += label_story(s) is SponsorLabel.SPONSORED
    accounts = {
        u: AccountShare(u, assign_tier(ds.profiles[u]), sp[u], tot[u], ssp[u], stot[u])
        for u in sorted(ds.profiles)
    }
    n_posts = sum(tot.values())
    n_stories = sum(stot.values())
    return ShareReport(
        accounts=accounts,
        global_post_share=sum(sp.values()) / n_posts if n_posts else 0.0,
        global_story_share=sum(ssp.values()) / n_stories if n_stories else 0.0,
        no_posts=tuple(u for u in sorted(ds.profiles) if tot[u] == 0),
    )


@dataclass(frozen=True)
class CategoryReport:
    accounts_per_category: dict[str, int]
    accounts_per_category_by_tier: dict[TierLabel, dict[str, int]]
    products_per_account: dict[str, int]

    def single_product_fraction(self, tier: TierLabel, profiles) -> float | None:
        vals = [n for u, n in self.products_per_account.items() if assign_tier(profiles[u]) is tier]
        if not vals:
            return None
        return sum(1 for n in vals if n == 1) / len(vals)


def product_category_counts(ds: Dataset) -> CategoryReport:
    cats: dict[str, set] = defaultdict(set)
    for s in ds.stories:
        if s.paid_partnership and s.advertiser_category:
            cats[s.author].add(s.advertiser_category)
    per_cat: Counter = Counter()
    per_tier: dict[TierLabel, Counter] = defaultdict(Counter)
    for user, cs in cats.items():
        tier = assign_tier(ds.profiles[user])
        for c in cs:
            per_cat[c] += 1
            per_tier[tier][c] += 1
    return CategoryReport(
        accounts_per_category=dict(sorted(per_cat.items(), key=lambda kv: (-kv[1], kv[0]))),
        accounts_per_category_by_tier={
            t: dict(sorted(per_tier[t].items(), key=lambda kv: (-kv[1], kv[0])))
            for t in sorted(per_tier, reverse=True)
        },
        products_per_account={u: len(cats[u]) for u in sorted(cats)},
    )


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return "" if x is None else str(x)


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _cdf_rows(group, values):
    if not values:
        return []
    return [(group, x, f) for x, f in cdf(values)]


def write_report_csvs(ds: Dataset, out_dir: str | os.PathLike) -> dict:
    """Write one CSV per figure analog into ``out_dir`` and return a summary dict."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tiers = {u: assign_tier(p) for u, p in ds.profiles.items()}

    rows = _cdf_rows("all/followers", [p.follower_count for p in ds.profiles.values()])
    rows += _cdf_rows("all/followees", [p.followee_count for p in ds.profiles.values()])
    for t in sorted(TierLabel, reverse=True):
        rows += _cdf_rows(f"{t.title}/followers", [p.follower_count for u, p in ds.profiles.items() if tiers[u] is t])
    _write_csv(out / "cdf_followers.csv", ["group", "x", "F"], rows)

    summaries = engagement_summary(ds)
    for fname, attr in (
        ("comments_abs.csv", "comment_counts"),
        ("comments_norm.csv", "comments_normalized"),
        ("likes_abs.csv", "like_counts"),
        ("likes_norm.csv", "likes_normalized"),
    ):
        rows = []
        for s in summaries:
            rows += _cdf_rows(s.group, getattr(s, attr))
        _write_csv(out / fname, ["group", "x", "F"], rows)

    lat = comment_latency_stats(ds)
    rows = []
    for (t, lab), st in lat.items():
        rows += _cdf_rows(f"{t.title}/{lab.value}", st.latencies_min)
    _write_csv(out / "latency.csv", ["group", "latency_min", "F"], rows)

    rep = repeat_commenter_stats(ds)
    rows = []
    for t in sorted(TierLabel, reverse=True):
        vals = [c for s in rep.values() if s.tier is t for c in s.comments_per_user.values()]
        rows += _cdf_rows(t.title, vals)
    _write_csv(out / "repeaters.csv", ["group", "comments_per_user", "F"], rows)

    share = sponsored_share(ds)
    rows = [
        (a.username, a.tier.title, a.sponsored_posts, a.total_posts, a.post_share,
         a.sponsored_stories, a.total_stories, a.story_share)
        for a in share.accounts.values()
    ]
    rows.append(("__global__", "", "", "", share.global_post_share, "", "", share.global_story_share))
    _write_csv(out / "share.csv", ["username", "tier", "sponsored_posts", "total_posts", "post_share",
                                   "sponsored_stories", "total_stories", "story_share"], rows)

    cats = product_category_counts(ds)
    rows = [(c, "all", n) for c, n in cats.accounts_per_category.items()]
    for t, per in cats.accounts_per_category_by_tier.items():
        rows += [(c, t.title, n) for c, n in per.items()]
    _write_csv(out / "categories.csv", ["category", "tier", "accounts"], rows)
    _write_csv(out / "products_per_account.csv", ["username", "tier", "categories"],
               [(u, tiers[u].title, n) for u, n in cats.products_per_account.items()])

    return {
        "latency_unit": "minutes",
        "median_latency_min": {f"{t.title}/{lab.value}": st.median_min for (t, lab), st in lat.items()},
        "median_comments": {s.group: s.median_comments for s in summaries},
        "median_likes": {s.group: s.median_likes for s in summaries},
        "repeat_fraction": {t.title: pooled_repeat_fraction(rep, t) for t in sorted(TierLabel, reverse=True)},
        "global_post_share": share.global_post_share,
        "global_story_share": share.global_story_share,
        "accounts_without_posts": list(share.no_posts),
        "excluded_zero_followers": sum(s.excluded_zero_followers for s in summaries),
        "single_product_fraction": {
            t.title: cats.single_product_fraction(t, ds.profiles) for t in sorted(TierLabel, reverse=True)
        },
    }

