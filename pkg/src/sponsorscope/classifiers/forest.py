"""Bagged Gini decision trees.

Each tree gets its own seed spawned from the master seed, so results do not
depend on the order trees are built in. Features that are constant inside a
node are never offered as split candidates; the per-split subsample is drawn
from the remaining ones.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

HASH_BINS = 1024
_KNUTH = 2654435761


def hash_text_bits(seqs, n_bins: int = HASH_BINS) -> np.ndarray:
    """Presence bits of token ids hashed into ``n_bins`` buckets; padding is ignored."""
    seqs = np.asarray(seqs, dtype=np.int64)
    if seqs.ndim == 1:
        seqs = seqs[None, :]
    bins = ((seqs * _KNUTH) % (1 << 32)) % n_bins
    out = np.zeros((seqs.shape[0], n_bins), dtype=np.float64)
    rows = np.broadcast_to(np.arange(seqs.shape[0])[:, None], seqs.shape)
    keep = seqs > 0
    out[rows[keep], bins[keep]] = 1.0
    return out


@dataclass
class Tree:
    feature: np.ndarray    # -1 at leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray      # P(label == 1) at each node

    def predict(self, X) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            feat = self.feature[node]
            internal = feat >= 0
            if not internal.any():
                return self.value[node]
            r = rows[internal]
            n = node[internal]
            go_left = X[r, feat[internal]] <= self.threshold[n]
            node[internal] = np.where(go_left, self.left[n], self.right[n])

    def to_dict(self):
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold"], dtype=np.float64),
            np.asarray(d["left"], dtype=np.int64),
            np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["value"], dtype=np.float64),
        )


@dataclass
class ForestModel:
    trees: list[Tree]
    n_features: int
    max_depth: int = 12
    max_features: int | None = None
    bootstrap: bool = True
    seed: int = 0
    degenerate: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def tree_count(self) -> int:
        return len(self.trees)

    def to_dict(self):
        return {
            "n_features": self.n_features,
            "max_depth": self.max_depth,
            "max_features": self.max_features,
            "bootstrap": self.bootstrap,
            "seed": self.seed,
            "degenerate": self.degenerate,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            trees=[Tree.from_dict(t) for t in d["trees"]],
            n_features=int(d["n_features"]),
            max_depth=int(d["max_depth"]),
            max_features=d["max_features"],
            bootstrap=bool(d["bootstrap"]),
            seed=int(d["seed"]),
            degenerate=bool(d.get("degenerate", False)),
        )


def _best_split(Xn, yn):
    """Best (column, threshold, impurity) over the columns of Xn, or None."""
    n = Xn.shape[0]
    order = np.argsort(Xn, axis=0, kind="stable")
    xs = np.take_along_axis(Xn, order, axis=0)
    ys = yn[order]
    pl = np.cumsum(ys, axis=0)[:-1]
    nl = np.arange(1, n, dtype=np.float64)[:, None]
    nr = n - nl
    pr = ys.sum(axis=0)[None, :] - pl
    # n * weighted Gini, up to the constant factor 2
    imp = pl * (nl - pl) / nl + pr * (nr - pr) / nr
    valid = xs[:-1] < xs[1:]
    if not valid.any():
        return None
    imp = np.where(valid, imp, np.inf)
    flat = int(np.argmin(imp))
    i, j = divmod(flat, imp.shape[1])
    thr = 0.5 * (xs[i, j] + xs[i + 1, j])
    if not thr < xs[i + 1, j]:
        thr = xs[i, j]
    return j, float(thr), float(imp[i, j])


def _sample_varying(XT, ids, pool, k, rng):
    """Uniform k-subset (sorted) of the features in ``pool`` that vary over rows ``ids``.

    The first k varying features of a random permutation form such a
    subset, so the pool is scanned in chunks rather than all at once.
    Features found constant here stay constant in every descendant, so the
    pool is returned without them. ``XT`` is the design matrix stored
    feature-major, which keeps these gathers cheap.
    """
    perm = pool[rng.permutation(pool.size)]
    want = pool.size if k is None else k
    chunk = max(16, 2 * want)
    found, constant = [], []
    n_found = 0
    for s in range(0, perm.size, chunk):
        cols = perm[s:s + chunk]
        sub = XT[cols][:, ids]
        varies = sub.min(axis=1) < sub.max(axis=1)
        constant.append(cols[~varies])
        take = cols[varies][:want - n_found]
        found.append(take)
        n_found += take.size
        if n_found == want:
            break
    cand = np.sort(np.concatenate(found)) if found else pool[:0]
    if constant:
        pool = np.setdiff1d(pool, np.concatenate(constant), assume_unique=True)
    return cand, pool


def _grow_tree(XT, y, idx, max_depth, max_features, rng, min_samples_split=2):
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(ids):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(y[ids].mean()))
        return len(feature) - 1

    root = new_node(idx)
    stack = [(root, idx, 0, np.arange(XT.shape[0]))]
    while stack:
        node, ids, depth, pool = stack.pop()
        yn = y[ids]
        pos = yn.sum()
        if depth >= max_depth or len(ids) < min_samples_split or pos == 0 or pos == len(ids):
            continue
        cand, pool = _sample_varying(XT, ids, pool, max_features, rng)
        if cand.size == 0:
            continue
        Xc = XT[cand][:, ids].T
        best = _best_split(Xc, yn)
        if best is None:
            continue
        j, thr, _ = best
        f = int(cand[j])
        go_left = Xc[:, j] <= thr
        li, ri = ids[go_left], ids[~go_left]
        feature[node] = f
        threshold[node] = thr
        left[node] = new_node(li)
        right[node] = new_node(ri)
        stack.append((right[node], ri, depth + 1, pool))
        stack.append((left[node], li, depth + 1, pool))
    return Tree(
        np.asarray(feature, dtype=np.int64),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        np.asarray(value, dtype=np.float64),
    )


def train_forest(X, y, n_trees: int = 100, max_depth: int = 12, max_features="sqrt",
                 bootstrap: bool = True, seed: int = 0) -> ForestModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be 2-D with one row per label")
    if X.shape[0] == 0:
        raise ValueError("empty training set")
    d = X.shape[1]
    if max_features == "sqrt":
        mf = max(1, int(math.sqrt(d)))
    elif max_features is None:
        mf = None
    else:
        mf = int(max_features)
    children = np.random.SeedSequence(seed).spawn(n_trees)
    XT = np.ascontiguousarray(X.T)
    trees = []
    n = X.shape[0]
    for ss in children:
        rng = np.random.default_rng(ss)
        idx = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        trees.append(_grow_tree(XT, y, idx, max_depth, mf, rng))
    degenerate = not np.any(X.min(axis=0) < X.max(axis=0)) and 0 < y.sum() < len(y)
    if degenerate:
        warnings.warn("all features are constant; forest predicts the class prior", stacklevel=2)
    return ForestModel(trees, d, max_depth, mf, bootstrap, seed, degenerate)


def predict_forest(model: ForestModel, X) -> np.ndarray:
    """Mean leaf probability across trees; one value per row."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} features, got {X.shape[1]}")
    total = np.zeros(X.shape[0])
    for t in model.trees:
        total += t.predict(X)
    return total / len(model.trees)
