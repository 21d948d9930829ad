"""Synthetic influencer corpora with planted sponsorship signals.

Every post gets a true status: ``sponsored`` (carries a disclosure hashtag),
``hidden`` (written the same way, but the disclosure tags are left off) or
``organic``. Default signal rates come from a manual inspection of
sponsored posts on the real platform; treat them as a modeling choice.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from .core import ADVERTISER_CATEGORIES, CommentRef, Post, Profile, Story, TierLabel
from .ingest.records import Dataset, dumps_line, save_dataset
from .labeling import DEFAULT_SPONSOR_TAGS

TIER_NAMES = ("Mega", "Macro", "Micro", "Nano")

# follower bands [lo, hi] per tier, sampled log-uniformly
FOLLOWER_BANDS = {
    "Mega": (1_000_000, 20_000_000),
    "Macro": (100_000, 999_999),
    "Micro": (10_001, 99_999),
    "Nano": (500, 10_000),
}
FOLLOWEE_MEDIAN = {"Mega": 845, "Macro": 1300, "Micro": 1900, "Nano": 900}
MEDIA_MEDIAN = {"Mega": 9100, "Macro": 3100, "Micro": 1800, "Nano": 597}
VERIFIED_RATE = {"Mega": 0.82, "Macro": 0.22, "Micro": 0.04, "Nano": 0.005}

WINDOW_START = 1561939200  # 2019-07-01T00:00:00Z
WINDOW_SECONDS = 62 * 86400

BRANDS = (
    "glowlab", "urbanthread", "peakfuel", "lunaskin", "brewhaus", "tickwell", "packtrail",
    "soundnest", "velvetlip", "zenleaf", "fitforge", "snackwise", "pixelplay", "homehearth",
    "aquapure", "stridely", "bloomery", "coastcandle", "nordicknit", "sparkbyte", "mintmouth",
    "trailmix", "silkroute", "gildedgem", "purepress", "cloudcup", "ironroot", "petalpost",
    "sunsip", "loomlane", "quickfit", "rosewater", "beanbox", "vitavibe", "nightowl",
    "seasalt", "framework", "goldleaf", "hushhome", "boldbrew",
)
PRODUCTS = (
    "outfit", "serum", "sneakers", "headphones", "protein", "lipstick", "coffee", "watch",
    "backpack", "skincare", "candle", "smoothie", "sunglasses", "moisturizer", "earbuds",
    "perfume", "yogamat", "tea", "jacket", "haircare",
)
PRODUCT_HASHTAG_FORMS = ("{p}", "{p}day", "best{p}", "trendy{p}", "{p}style", "{p}oftheday", "my{p}")
RAW_PRODUCT_PHRASES = (
    "My new {product} from {Brand}",
    "Loving this {product} by {Brand}",
    "{Brand} {product} is a game changer",
    "Obsessed with the {Brand} {product}",
    "Trying the {product} from {Brand} today",
)
GRATITUDE_PHRASES = (
    "thank you {X}",
    "many thanks to {X}",
    "{X} from this page",
    "my top choice is {X}",
    "go and follow {X}",
)
# lowercase substrings that identify each gratitude phrase in a caption
GRATITUDE_MARKERS = ("thank you ", "many thanks to ", " from this page", "my top choice is ", "go and follow ")
CTA_PHRASES = (
    "link in bio",
    "download it",
    "watch my story",
    "use discount code {code}",
    "comment to win",
    "like to win",
)
CTA_MARKERS = ("link in bio", "download it", "watch my story", "use discount code", "comment to win", "like to win")
GENERIC_HASHTAGS = (
    "love", "instagood", "photooftheday", "sunset", "travel", "weekend", "family", "foodie",
    "fitness", "nofilter", "happy", "summer", "friends", "nature", "adventure", "adorable",
    "mood", "goodvibes", "selfie", "life",
)
BIO_BASE = ("travel", "food", "fitness", "fashion", "beauty", "lifestyle", "music", "art", "family", "tech")
CITIES = ("London", "Paris", "Milan", "Berlin", "Madrid", "Dublin", "Lisbon", "Leeds", "Lyon", "Porto")
BIO_SPONSOR_INFO = ("promo code {code}", "sponsor info in highlights", "campaign details below",
                    "collab enquiries by email")
BIO_CTA = ("follow for more", "check out my shop", "join the club", "buy the look", "watch my latest video")
CATEGORY_WEIGHTS = {"Health/Beauty": 0.14, "Product/Service": 0.11, "Clothing (Brand)": 0.11}


@lru_cache(maxsize=1)
def neutral_captions() -> tuple[str, ...]:
    text = resources.files("sponsorscope.data").joinpath("neutral_captions.txt").read_text("utf-8")
    return tuple(line for line in text.splitlines() if line.strip())


def _per_tier(**vals):
    return dict(vals)


@dataclass
class SynthConfig:
    accounts: dict = field(default_factory=lambda: _per_tier(Mega=20, Macro=50, Micro=100, Nano=130))
    posts_per_account: tuple = (5, 35)
    n_posts: int | None = None
    sponsored_fraction: float = 0.2
    hidden_fraction: float = 0.0

    # caption signals in sponsored (and hidden) posts
    product_raw_rate: float = 0.94
    mention_rate: float = 0.91
    gratitude_rate: float = 0.78
    cta_rate: float = 0.53
    product_hashtag_rate: float = 0.97
    # organic posts
    organic_mention_rate: float = 0.15
    organic_tag_rate: float = 0.1
    sponsored_tag_rate: float = 0.6

    # biography signals, for accounts with at least one sponsored post
    bio_sponsor_info_rate: float = 0.63
    bio_tag_mention_rate: float = 0.54
    bio_cta_rate: float = 0.34
    bio_url_rate: float = 0.21
    bio_video_rate: float = 0.11
    bio_nonpromoter_factor: float = 0.2

    # engagement
    like_rate: dict = field(default_factory=lambda: _per_tier(Mega=0.01, Macro=0.02, Micro=0.03, Nano=0.04))
    sponsored_like_factor: dict = field(
        default_factory=lambda: _per_tier(Mega=1 / 1.28, Macro=1 / 1.06, Micro=1 / 1.06, Nano=56 / 47))
    comment_rate: dict = field(
        default_factory=lambda: _per_tier(Mega=0.00003, Macro=0.00012, Micro=0.0006, Nano=0.004))
    sponsored_comment_factor: dict = field(
        default_factory=lambda: _per_tier(Mega=0.1, Macro=0.5, Micro=0.5, Nano=0.5))
    max_comments_per_post: int = 400
    latency_median_min: dict = field(
        default_factory=lambda: _per_tier(Mega=328.0, Macro=260.0, Micro=180.0, Nano=120.0))
    sponsored_latency_factor: float = 366.5 / 328.0
    repeater_fraction: dict = field(default_factory=lambda: _per_tier(Mega=0.05, Macro=0.12, Micro=0.2, Nano=0.3))

    # stories
    stories_per_account: tuple = (0, 6)
    paid_story_rate: dict = field(default_factory=lambda: _per_tier(Mega=0.3, Macro=0.2, Micro=0.1, Nano=0.0))
    category_rate: float = 0.03
    single_product_fraction: dict = field(
        default_factory=lambda: _per_tier(Mega=0.5, Macro=0.58, Micro=0.7, Nano=0.7))

    seed: int = 0

    def __post_init__(self):
        self.posts_per_account = tuple(self.posts_per_account)
        self.stories_per_account = tuple(self.stories_per_account)
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name.endswith(("_rate", "_fraction")) and not isinstance(v, dict):
                if not 0.0 <= v <= 1.0:
                    raise ValueError(f"{f.name} must be in [0, 1]")
        for name in ("repeater_fraction", "paid_story_rate", "single_product_fraction"):
            for tier, v in getattr(self, name).items():
                if not 0.0 <= v <= 1.0:
                    raise ValueError(f"{name}[{tier}] must be in [0, 1]")
        if self.hidden_fraction > self.sponsored_fraction:
            raise ValueError("hidden_fraction cannot exceed sponsored_fraction")
        lo, hi = self.posts_per_account
        if not 0 <= lo <= hi:
            raise ValueError("posts_per_account must be an ordered non-negative range")
        for tier in self.accounts:
            if tier not in TIER_NAMES:
                raise ValueError(f"unknown tier {tier!r}")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown SynthConfig fields: {sorted(unknown)}")
        base = cls()
        merged = {}
        for k, v in d.items():
            cur = getattr(base, k)
            merged[k] = {**cur, **v} if isinstance(cur, dict) and isinstance(v, dict) else v
        return cls(**merged)

    @classmethod
    def from_json(cls, path) -> "SynthConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class SynthCorpus:
    dataset: Dataset
    manifest: dict[str, str]
    signals: dict[str, frozenset] = field(default_factory=dict)

    def ids_with_status(self, status) -> list[str]:
        return [pid for pid, s in self.manifest.items() if s == status]

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        save_dataset(self.dataset, out)
        with open(out / "manifest.jsonl", "w", encoding="utf-8", newline="\n") as fh:
            for pid in sorted(self.manifest):
                fh.write(dumps_line({"post_id": pid, "true_status": self.manifest[pid]}) + "\n")


def read_manifest(path) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                obj = json.loads(line)
                out[obj["post_id"]] = obj["true_status"]
    return out


class _Gen:
    def __init__(self, cfg: SynthConfig):
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)

    def pick(self, seq):
        return seq[int(self.rng.integers(len(seq)))]

    def coin(self, p):
        return bool(self.rng.random() < p)

    def code(self):
        letters = "ABCDEFGHJKLMNPQRSTUVWXYZ"
        return "".join(self.pick(letters) for _ in range(4)) + str(int(self.rng.integers(10, 100)))

    def lognormal_int(self, median, sigma=0.8):
        return max(0, int(round(median * math.exp(sigma * self.rng.standard_normal()))))

    def followers(self, tier):
        lo, hi = FOLLOWER_BANDS[tier]
        return int(min(hi, max(lo, round(math.exp(self.rng.uniform(math.log(lo), math.log(hi + 1)))))))

    def bio(self, username, promoter):
        c = self.cfg
        f = 1.0 if promoter else c.bio_nonpromoter_factor
        parts = [" | ".join(self.rng.choice(BIO_BASE, size=2, replace=False).tolist()) + f" | {self.pick(CITIES)}"]
        brand = self.pick(BRANDS)
        if self.coin(c.bio_sponsor_info_rate * f):
            parts.append(self.pick(BIO_SPONSOR_INFO).format(code=self.code()))
        if self.coin(c.bio_tag_mention_rate * f):
            parts.append(f"@{brand}" if self.coin(0.5) else f"#{brand}")
        if self.coin(c.bio_cta_rate * f):
            parts.append(self.pick(BIO_CTA))
        if self.coin(c.bio_video_rate * f):
            parts.append(f"youtube.com/c/{username.replace('_', '')}")
        url = f"https://{brand}.example.com/{username}" if self.coin(c.bio_url_rate * f) else None
        return " · ".join(parts), url

    def organic_caption(self):
        c = self.cfg
        parts = [self.pick(neutral_captions())]
        if self.coin(c.organic_mention_rate):
            parts.append(f"with @friend_{int(self.rng.integers(1000)):03d}")
        tags = self.rng.choice(GENERIC_HASHTAGS, size=int(self.rng.integers(0, 5)), replace=False)
        text = " ".join(parts)
        if len(tags):
            text += " " + " ".join(f"#{t}" for t in tags)
        return text, frozenset()

    def sponsored_caption(self, brand, product, disclose):
        c = self.cfg
        signals = set()
        Brand = brand.capitalize()
        sentences = []
        mention = self.coin(c.mention_rate)
        if self.coin(c.product_raw_rate):
            sentences.append(self.pick(RAW_PRODUCT_PHRASES).format(product=product, Brand=Brand))
            signals.add("product_raw")
        if self.coin(c.gratitude_rate):
            x = f"@{brand}" if mention else Brand
            sentences.append(self.pick(GRATITUDE_PHRASES).format(X=x))
            signals.add("gratitude")
        elif mention:
            sentences.append(f"featuring @{brand}")
        if mention:
            signals.add("mention")
        if self.coin(c.cta_rate):
            sentences.append(self.pick(CTA_PHRASES).format(code=self.code()))
            signals.add("cta")
        if self.coin(0.5):
            sentences.append(self.pick(neutral_captions()))
        order = self.rng.permutation(len(sentences))
        text = ". ".join(sentences[i] for i in order)
        tags = []
        if self.coin(c.product_hashtag_rate):
            forms = self.rng.choice(PRODUCT_HASHTAG_FORMS, size=int(self.rng.integers(1, 4)), replace=False)
            tags += [f.format(p=product) for f in forms]
            if self.coin(0.5):
                tags.append(brand)
            signals.add("product_hashtag")
        tags += self.rng.choice(GENERIC_HASHTAGS, size=int(self.rng.integers(0, 3)), replace=False).tolist()
        if disclose:
            chosen = self.rng.choice(sorted(DEFAULT_SPONSOR_TAGS), size=int(self.rng.integers(1, 3)), replace=False)
            for t in chosen:
                style = int(self.rng.integers(3))
                tags.append(t.upper() if style == 0 else t.capitalize() if style == 1 else t)
        tag_order = self.rng.permutation(len(tags))
        if tags:
            text = (text + " " if text else "") + " ".join(f"#{tags[i]}" for i in tag_order)
        return text, frozenset(signals)


def _allocate_posts(gen, n_accounts, cfg):
    if cfg.n_posts is None:
        lo, hi = cfg.posts_per_account
        return gen.rng.integers(lo, hi + 1, size=n_accounts)
    if n_accounts == 0:
        return np.zeros(0, dtype=np.int64)
    base = np.full(n_accounts, 1 if cfg.n_posts >= n_accounts else 0, dtype=np.int64)
    rest = cfg.n_posts - int(base.sum())
    return base + gen.rng.multinomial(rest, np.full(n_accounts, 1.0 / n_accounts))


def _category_pick(gen, exclude=()):
    others = [c for c in ADVERTISER_CATEGORIES if c not in CATEGORY_WEIGHTS]
    rest = (1.0 - sum(CATEGORY_WEIGHTS.values())) / len(others)
    cats = [c for c in ADVERTISER_CATEGORIES if c not in exclude]
    w = np.array([CATEGORY_WEIGHTS.get(c, rest) for c in cats])
    return cats[int(gen.rng.choice(len(cats), p=w / w.sum()))]


def generate_corpus(config: SynthConfig | None = None) -> SynthCorpus:
    """Build a corpus and its ground-truth manifest; fully determined by ``config.seed``."""
    cfg = config or SynthConfig()
    gen = _Gen(cfg)
    rng = gen.rng

    tiers = []
    for tier in TIER_NAMES:
        tiers += [tier] * int(cfg.accounts.get(tier, 0))
    usernames = [f"{t.lower()}_{i:04d}" for i, t in enumerate(tiers)]
    post_counts = _allocate_posts(gen, len(usernames), cfg)
    n_posts = int(post_counts.sum())

    n_sp = int(round(cfg.sponsored_fraction * n_posts))
    n_hidden = int(round(cfg.hidden_fraction * n_posts))
    status = np.array(["organic"] * n_posts, dtype=object)
    sp_idx = rng.choice(n_posts, size=n_sp, replace=False)
    status[sp_idx] = "sponsored"
    status[rng.choice(sp_idx, size=n_hidden, replace=False)] = "hidden"

    owner = np.repeat(np.arange(len(usernames)), post_counts)
    promoters = {int(a) for a in owner[status != "organic"]}

    profiles = {}
    followers = {}
    for a, (user, tier) in enumerate(zip(usernames, tiers)):
        fol = gen.followers(tier)
        followers[user] = fol
        bio, url = gen.bio(user, a in promoters)
        profiles[user] = Profile(
            username=user,
            follower_count=fol,
            followee_count=gen.lognormal_int(FOLLOWEE_MEDIAN[tier]),
            media_count=max(int(post_counts[a]), gen.lognormal_int(MEDIA_MEDIAN[tier])),
            is_verified=gen.coin(VERIFIED_RATE[tier]),
            biography=bio,
            external_url=url,
        )

    # posts: text, timing, likes; comments are attached per account below
    drafts = []
    for k in range(n_posts):
        a = int(owner[k])
        user, tier = usernames[a], tiers[a]
        st = status[k]
        if st == "organic":
            caption, sig = gen.organic_caption()
            tagged = [f"friend_{int(rng.integers(1000)):03d}"] if gen.coin(cfg.organic_tag_rate) else []
        else:
            brand, product = gen.pick(BRANDS), gen.pick(PRODUCTS)
            caption, sig = gen.sponsored_caption(brand, product, disclose=(st == "sponsored"))
            tagged = [brand] if gen.coin(cfg.sponsored_tag_rate) else []
        taken_at = WINDOW_START + int(rng.integers(WINDOW_SECONDS))
        fol = followers[user]
        like_mu = fol * cfg.like_rate[tier] * (cfg.sponsored_like_factor[tier] if st != "organic" else 1.0)
        com_mu = fol * cfg.comment_rate[tier] * (cfg.sponsored_comment_factor[tier] if st != "organic" else 1.0)
        n_comments = min(int(rng.poisson(com_mu)), cfg.max_comments_per_post)
        drafts.append(dict(id=f"p{k:07d}", user=user, tier=tier, status=st, caption=caption, signals=sig,
                           tagged=tagged, taken_at=taken_at, likes=int(rng.poisson(like_mu)),
                           n_comments=n_comments))

    by_user: dict[str, list] = {u: [] for u in usernames}
    for d in drafts:
        by_user[d["user"]].append(d)
    comments: dict[str, list] = {d["id"]: [] for d in drafts}
    for a, user in enumerate(usernames):
        tier = tiers[a]
        ds_ = by_user[user]
        total = sum(d["n_comments"] for d in ds_)
        events = []
        cid = 0
        while len(events) < total:
            remaining = total - len(events)
            if remaining >= 2 and gen.coin(cfg.repeater_fraction[tier]):
                m = min(remaining, 1 + int(rng.geometric(0.6)))
            else:
                m = 1
            events += [f"fan_{a:04d}_{cid:05d}"] * m
            cid += 1
        events = [events[i] for i in rng.permutation(len(events))]
        pos = 0
        for d in ds_:
            median = cfg.latency_median_min[tier] * (cfg.sponsored_latency_factor if d["status"] != "organic" else 1.0)
            scale_s = median * 60.0 / math.log(2)
            for who in events[pos:pos + d["n_comments"]]:
                lat = int(math.ceil(rng.exponential(scale_s)))
                comments[d["id"]].append(CommentRef(who, d["taken_at"] + lat))
            pos += d["n_comments"]

    posts = []
    for d in drafts:
        cs = sorted(comments[d["id"]], key=lambda c: (c.taken_at, c.commenter))
        posts.append(Post(id=d["id"], author=d["user"], taken_at=d["taken_at"], caption=d["caption"],
                          like_count=d["likes"], tagged_users=tuple(d["tagged"]), comments=tuple(cs)))

    stories = _generate_stories(gen, usernames, tiers)
    manifest = {d["id"]: d["status"] for d in drafts}
    signals = {d["id"]: d["signals"] for d in drafts}
    return SynthCorpus(Dataset(profiles, posts, stories), manifest, signals)


def _generate_stories(gen, usernames, tiers):
    cfg = gen.cfg
    rng = gen.rng
    lo, hi = cfg.stories_per_account
    stories = []
    n = 0

    def story(user, paid, cat):
        nonlocal n
        s = Story(f"s{n:07d}", user, WINDOW_START + int(rng.integers(WINDOW_SECONDS)), paid, cat)
        n += 1
        return s

    for user, tier in zip(usernames, tiers):
        k = int(rng.integers(lo, hi + 1))
        paid = [gen.coin(cfg.paid_story_rate[tier]) for _ in range(k)]
        categorized = [p and gen.coin(cfg.category_rate) for p in paid]
        cats: list = [None] * k
        if any(categorized):
            slots = [i for i, c in enumerate(categorized) if c]
            primary = _category_pick(gen)
            single = gen.coin(cfg.single_product_fraction[tier])
            for i in slots:
                cats[i] = primary
            if not single:
                if len(slots) == 1:
                    paid.append(True)
                    cats.append(None)
                    slots.append(len(paid) - 1)
                second = _category_pick(gen, exclude=(primary,))
                cats[slots[-1]] = second
                for i in slots[1:-1]:
                    cats[i] = _category_pick(gen)
        for p, c in zip(paid, cats):
            stories.append(story(user, p, c))
    return stories


def generate_to_dir(config: SynthConfig, out_dir) -> SynthCorpus:
    corpus = generate_corpus(config)
    corpus.write(out_dir)
    return corpus
