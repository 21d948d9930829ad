import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sponsorscope.classifiers import ForestClassifier
from sponsorscope.core import TierLabel
from sponsorscope.dataset import Example, LabeledSet, kfold_partition
from sponsorscope.evaluation import (
    ConfusionMatrix,
    EvaluationError,
    Metrics,
    compute_metrics,
    cross_validate,
    detect_hidden,
    evaluate,
    format_metrics_table,
)


def make_set(labels, tiers=None, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for i, y in enumerate(labels):
        tier = tiers[i] if tiers else TierLabel.NANO
        toks = ("deal" if y else "sunset", f"w{rng.integers(20)}")
        out.append(Example(f"p{i:04d}", f"u{i % 7}", tier, int(y), toks, tuple(rng.standard_normal(11))))
    return LabeledSet(out)


class Constant:
    def __init__(self, p):
        self.p = p

    def predict_proba(self, exs):
        return np.full(len(list(exs)), self.p)


class Lookup:
    def __init__(self, table):
        self.table = table

    def predict_proba(self, exs):
        return np.array([self.table[e.post_id] for e in exs])


def test_worked_example():
    m = compute_metrics(ConfusionMatrix(tp=3, fp=1, fn=2, tn=4))
    assert m.accuracy == pytest.approx(0.7)
    assert m.precision == pytest.approx(0.75)
    assert m.recall == pytest.approx(0.6)
    assert m.f1 == pytest.approx(2 / 3)


def test_perfect_classifier():
    m = compute_metrics(ConfusionMatrix(tp=5, tn=7))
    assert (m.accuracy, m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0, 1.0)


def test_no_positive_predictions_gives_null_precision():
    m = compute_metrics(ConfusionMatrix(tp=0, fp=0, fn=4, tn=6))
    assert m.precision is None and m.f1 is None
    assert m.accuracy == 0.6 and m.recall == 0.0


def test_empty_confusion_matrix_is_an_error():
    with pytest.raises(EvaluationError):
        compute_metrics(ConfusionMatrix())


def test_metrics_match_brute_recount():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        n = int(rng.integers(1, 40))
        y = rng.integers(0, 2, n)
        p = rng.integers(0, 2, n)
        cm = ConfusionMatrix.from_predictions(y, p)
        tp = sum(1 for a, b in zip(y, p) if a == 1 and b == 1)
        fp = sum(1 for a, b in zip(y, p) if a == 0 and b == 1)
        fn = sum(1 for a, b in zip(y, p) if a == 1 and b == 0)
        tn = n - tp - fp - fn
        assert (cm.tp, cm.fp, cm.fn, cm.tn) == (tp, fp, fn, tn)
        m = compute_metrics(cm)
        assert m.accuracy == (tp + tn) / n
        prec = tp / (tp + fp) if tp + fp else None
        rec = tp / (tp + fn) if tp + fn else None
        assert m.precision == prec and m.recall == rec
        if prec is None or rec is None or prec + rec == 0:
            assert m.f1 is None
        else:
            assert m.f1 == pytest.approx(2 * prec * rec / (prec + rec), abs=1e-12)


def test_cv_folds_equal_kfold_partition():
    ls = make_set([i % 2 for i in range(37)])
    res = cross_validate(lambda tr: Constant(0.9), ls, 5, seed=11)
    assert res.fold_ids == [f.ids for f in kfold_partition(ls, 5, 11)]


def test_constant_trainer_scores_chance():
    ls = make_set([i % 2 for i in range(20)])
    res = cross_validate(lambda tr: Constant(0.9), ls, 5, seed=0)
    assert [m.accuracy for m in res.folds] == [0.5] * 5
    assert res.mean["accuracy"] == 0.5


def test_leave_one_out():
    ls = make_set([i % 2 for i in range(10)])
    res = cross_validate(lambda tr: Constant(0.1), ls, 10, seed=0)
    assert len(res.folds) == 10
    assert all(len(ids) == 1 for ids in res.fold_ids)
    assert res.mean["accuracy"] == 0.5


def test_cv_fold_without_both_classes_names_the_fold():
    ls = make_set([1] + [0] * 9)
    with pytest.raises(EvaluationError, match=r"fold \d+"):
        cross_validate(lambda tr: Constant(0.1), ls, 10, seed=0)


def test_cv_on_separable_set():
    ls = make_set([i % 2 for i in range(200)])
    res = cross_validate(lambda tr: ForestClassifier(n_trees=10).fit(tr), ls, 10, seed=1)
    assert res.mean["accuracy"] >= 0.95


def test_cv_refits_featurizer_per_fold():
    ls = make_set([i % 2 for i in range(40)])
    seen = []

    def fit(tr):
        clf = ForestClassifier(n_trees=3).fit(tr)
        seen.append(clf.featurizer.fitted_on)
        return clf

    res = cross_validate(fit, ls, 4, seed=0)
    for fitted, held in zip(seen, res.fold_ids):
        assert fitted.isdisjoint(held)
        assert len(fitted) == 30


def test_evaluate_refuses_leaked_examples():
    ls = make_set([i % 2 for i in range(40)])
    clf = ForestClassifier(n_trees=3).fit(ls)
    with pytest.raises(EvaluationError, match="40 test examples"):
        evaluate(clf, ls)


def test_evaluate_threshold():
    ls = make_set([0, 1, 1, 0])
    model = Lookup({"p0000": 0.2, "p0001": 0.6, "p0002": 0.8, "p0003": 0.7})
    cm, _ = evaluate(model, ls, threshold=0.5)
    assert (cm.tp, cm.fp, cm.fn, cm.tn) == (2, 1, 0, 1)
    cm, _ = evaluate(model, ls, threshold=0.75)
    assert (cm.tp, cm.fp, cm.fn, cm.tn) == (1, 0, 1, 2)


TIERS = [TierLabel.MEGA, TierLabel.MACRO, TierLabel.MICRO, TierLabel.NANO]


def test_unreachable_threshold_flags_nothing():
    ls = make_set([0] * 12, tiers=[TIERS[i % 4] for i in range(12)])
    rep = detect_hidden(Constant(1.0), ls, threshold=1.01)
    assert rep.flagged == 0 and rep.total == 12
    assert all(t.flagged == 0 for t in rep.tiers.values())


def test_empty_audit():
    rep = detect_hidden(Constant(0.9), [], threshold=0.5)
    assert rep.total == 0 and rep.flagged == 0 and rep.tiers == {}
    assert rep.as_dict()["global_fraction"] == 0.0


def test_audit_recall_against_plants():
    ls = make_set([0] * 6)
    model = Lookup({f"p{i:04d}": p for i, p in enumerate([0.9, 0.2, 0.7, 0.1, 0.6, 0.4])})
    rep = detect_hidden(model, ls, 0.5, plants={"p0000", "p0001", "p0002", "p0003", "zzz"})
    assert rep.flagged_ids == ["p0000", "p0002", "p0004"]
    assert rep.plants_audited == 4
    assert rep.recall == 0.5


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=40), st.lists(st.floats(0, 1.2), min_size=2, max_size=6))
def test_flagged_fraction_monotone_and_bounded(probs, thresholds):
    ls = make_set([0] * len(probs), tiers=[TIERS[i % 4] for i in range(len(probs))])
    model = Lookup({f"p{i:04d}": p for i, p in enumerate(probs)})
    fractions = []
    for t in sorted(thresholds):
        rep = detect_hidden(model, ls, t)
        assert all(a.flagged <= a.total for a in rep.tiers.values())
        fractions.append(rep.global_fraction)
    assert all(a >= b for a, b in zip(fractions, fractions[1:]))


def test_format_metrics_table():
    text = format_metrics_table({
        "forest": Metrics(0.84, 0.83, 0.84, 0.83),
        "contextual": {"accuracy": 0.5, "precision": None, "recall": 0.0, "f1": None},
    })
    lines = text.splitlines()
    assert lines[0].startswith("Model      | Accuracy")
    assert lines[2] == "forest     |     0.84     0.83     0.84     0.83"
    assert lines[3] == "contextual |     0.50      n/a     0.00      n/a"
