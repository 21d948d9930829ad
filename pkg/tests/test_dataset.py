from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sponsorscope.core import TierLabel
from sponsorscope.dataset import (
    BalanceError,
    Example,
    Featurizer,
    LabeledSet,
    SplitError,
    build_examples,
    kfold_partition,
    read_examples,
    read_split_manifest,
    split_train_test,
    undersample_balance,
    write_examples,
    write_split_manifest,
)
from sponsorscope.ingest import Dataset
from sponsorscope.labeling import label_posts
from sponsorscope.synth import SynthConfig, generate_corpus

TIERS = list(TierLabel)


def ex(i, label, author="u", tier=TierLabel.NANO):
    return Example(f"p{i:05d}", author, tier, label, ("tok",), (0.0,) * 11)


def make_set(n_pos, n_neg, authors=None):
    authors = authors or [("u", TierLabel.NANO)]
    out = [ex(i, 1, *authors[i % len(authors)]) for i in range(n_pos)]
    out += [ex(n_pos + i, 0, *authors[i % len(authors)]) for i in range(n_neg)]
    return LabeledSet(out)


def expected_removals(ls):
    """Per-author removal counts by direct simulation of the stated policy."""
    n_neg, n_pos = ls.class_counts()
    left = Counter(e.author for e in ls if e.label == 0)
    tier = {e.author: e.tier for e in ls}
    need = n_neg - n_pos
    removed = Counter()
    for floor in (1, 0):
        for t in sorted(TierLabel):
            while need:
                cands = [a for a in left if tier[a] is t and left[a] > floor]
                if not cands:
                    break
                a = min(cands, key=lambda x: (-left[x], x))
                left[a] -= 1
                removed[a] += 1
                need -= 1
    return removed


def test_balance_examples():
    ls = make_set(3, 5)
    a = undersample_balance(ls, 1)
    assert a.class_counts() == (3, 3)
    assert a.ids == undersample_balance(ls, 1).ids
    same = make_set(4, 4)
    assert undersample_balance(same, 0).examples == same.examples
    with pytest.raises(BalanceError, match="nothing to balance"):
        undersample_balance(make_set(0, 4), 0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3), st.integers(0, 1)), min_size=1, max_size=80),
       st.integers(0, 10))
def test_balance_matches_policy_oracle(rows, seed):
    exs = [ex(i, lab, f"a{a}", TIERS[t]) for i, (a, t, lab) in enumerate(rows)]
    # one tier per author
    tiers = {}
    exs = [Example(e.post_id, e.author, tiers.setdefault(e.author, e.tier), e.label, e.tokens, e.numeric)
           for e in exs]
    ls = LabeledSet(exs)
    n0, n1 = ls.class_counts()
    if n1 == 0 or n0 < n1:
        return
    out = undersample_balance(ls, seed)
    assert out.class_counts() == (n1, n1)
    assert [e for e in out if e.label == 1] == [e for e in ls if e.label == 1]
    gone = Counter(e.author for e in ls if e.label == 0) - Counter(e.author for e in out if e.label == 0)
    assert gone == expected_removals(ls)


def test_balance_prefers_nano_and_busy_authors():
    exs = [ex(i, 0, "big") for i in range(6)] + [ex(10 + i, 0, "small") for i in range(2)]
    exs += [ex(20 + i, 0, "mega", TierLabel.MEGA) for i in range(3)] + [ex(30 + i, 1, "mega", TierLabel.MEGA) for i in range(6)]
    out = undersample_balance(LabeledSet(exs), 0)
    left = Counter(e.author for e in out if e.label == 0)
    # five removals, all from Nano; "big" wins the 2-vs-2 tie with "small" by name
    assert left == {"big": 1, "small": 2, "mega": 3}


def test_split_examples():
    ls = make_set(2, 2)
    tr, te = split_train_test(ls, 0.5, 0)
    assert tr.class_counts() == (1, 1) and te.class_counts() == (1, 1)
    big = make_set(50, 50)
    tr, te = split_train_test(big, 0.2, 3)
    assert len(tr) == 80 and len(te) == 20
    assert set(tr.ids).isdisjoint(te.ids) and set(tr.ids) | set(te.ids) == set(big.ids)
    assert split_train_test(big, 0.2, 3)[1].ids == te.ids
    with pytest.raises(SplitError):
        split_train_test(make_set(1, 5), 0.2, 0)
    with pytest.raises(SplitError):
        split_train_test(big, 1.0, 0)


def test_split_at_full_scale():
    tr, te = split_train_test(make_set(7000, 7000), 0.2, 1)
    assert (len(tr), len(te)) == (11200, 2800)
    assert te.class_counts() == (1400, 1400)


@pytest.mark.parametrize("n_pos, n_neg, k", [(50, 50, 10), (3, 4, 3), (1, 9, 4), (13, 29, 5)])
def test_kfold_partition(n_pos, n_neg, k):
    ls = make_set(n_pos, n_neg)
    folds = kfold_partition(ls, k, 2)
    sizes = [len(f) for f in folds]
    assert max(sizes) - min(sizes) <= 1
    ids = [i for f in folds for i in f.ids]
    assert sorted(ids) == sorted(ls.ids) and len(set(ids)) == len(ids)
    pos = [f.class_counts()[1] for f in folds]
    assert max(pos) - min(pos) <= 1
    assert [f.ids for f in kfold_partition(ls, k, 2)] == [f.ids for f in folds]


def test_kfold_sizes():
    assert [len(f) for f in kfold_partition(make_set(50, 50), 10, 0)] == [10] * 10
    assert sorted(len(f) for f in kfold_partition(make_set(3, 4), 3, 0)) == [2, 2, 3]
    with pytest.raises(SplitError):
        kfold_partition(make_set(2, 2), 5, 0)
    with pytest.raises(SplitError):
        kfold_partition(make_set(2, 2), 1, 0)


def test_labeled_set_invariants():
    with pytest.raises(ValueError):
        LabeledSet([ex(1, 1), ex(1, 0)])
    with pytest.raises(ValueError):
        LabeledSet([ex(1, 2)])


def test_examples_roundtrip(tmp_path):
    ds = generate_corpus(SynthConfig(accounts={"Nano": 4, "Mega": 1}, seed=5)).dataset
    ls = build_examples(Dataset(ds.profiles, label_posts(ds.posts), ds.stories))
    assert ls.ids == sorted(ls.ids)
    write_examples(ls, tmp_path / "e.jsonl")
    assert read_examples(tmp_path / "e.jsonl").examples == ls.examples
    write_split_manifest(tmp_path / "s.json", train=ls.ids[:3], test=ls.ids[3:])
    assert read_split_manifest(tmp_path / "s.json") == {"train": ls.ids[:3], "test": ls.ids[3:]}


def test_build_examples_requires_labels():
    ds = generate_corpus(SynthConfig(accounts={"Nano": 1}, seed=0)).dataset
    with pytest.raises(ValueError, match="unlabeled"):
        build_examples(ds)


def test_featurizer_fits_on_train_only():
    train = LabeledSet([Example("a", "u", TierLabel.NANO, 1, ("x", "y"), tuple(range(11))),
                        Example("b", "u", TierLabel.NANO, 0, ("x",), tuple(range(1, 12)))])
    test = LabeledSet([Example("c", "u", TierLabel.NANO, 0, ("z",), (100.0,) * 11)])
    f = Featurizer.fit(train, 10, 4)
    assert "z" not in f.vocab.index
    seqs, num = f.transform(test)
    assert seqs.tolist() == [[0, 0, 0, 1]]
    assert np.allclose(f.standardizer.mean, np.arange(11) + 0.5)
    g = Featurizer.from_dict(f.to_dict())
    assert np.array_equal(g.transform(test)[1], num)
