"""Classification metrics, k-fold cross-validation and the hidden-sponsorship audit."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import TierLabel
from .dataset import LabeledSet, kfold_partition

METRIC_NAMES = ("accuracy", "precision", "recall", "f1")


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @classmethod
    def from_predictions(cls, y_true, y_pred) -> "ConfusionMatrix":
        t = np.asarray(y_true, dtype=bool)
        p = np.asarray(y_pred, dtype=bool)
        return cls(int(np.sum(t & p)), int(np.sum(~t & p)), int(np.sum(t & ~p)), int(np.sum(~t & ~p)))


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float | None
    recall: float | None
    f1: float | None

    def as_dict(self):
        return asdict(self)


def compute_metrics(cm: ConfusionMatrix) -> Metrics:
    """Positive-class metrics; a metric with a zero denominator is None."""
    n = cm.total
    if n == 0:
        raise EvaluationError("no examples to score")
    precision = cm.tp / (cm.tp + cm.fp) if cm.tp + cm.fp else None
    recall = cm.tp / (cm.tp + cm.fn) if cm.tp + cm.fn else None
    if precision is None or recall is None or precision + recall == 0:
        f1 = None
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return Metrics((cm.tp + cm.tn) / n, precision, recall, f1)


def evaluate(clf, test: LabeledSet, threshold: float = 0.5) -> tuple[ConfusionMatrix, Metrics]:
    """Score ``clf`` on ``test``; refuses test examples the classifier was fitted on."""
    featurizer = getattr(clf, "featurizer", None)
    if featurizer is not None:
        leaked = featurizer.fitted_on & set(test.ids)
        if leaked:
            raise EvaluationError(f"{len(leaked)} test examples were part of the training data")
    proba = clf.predict_proba(test)
    cm = ConfusionMatrix.from_predictions(test.labels, proba >= threshold)
    return cm, compute_metrics(cm)


@dataclass
class CVResult:
    folds: list[Metrics]
    fold_ids: list[list[str]]
    mean: dict[str, float | None] = field(default_factory=dict)
    std: dict[str, float | None] = field(default_factory=dict)

    def as_dict(self):
        return {
            "k": len(self.folds),
            "folds": [m.as_dict() for m in self.folds],
            "mean": self.mean,
            "std": self.std,
        }


def _aggregate(folds):
    mean, std = {}, {}
    for name in METRIC_NAMES:
        vals = [getattr(m, name) for m in folds if getattr(m, name) is not None]
        if vals:
            mean[name] = math.fsum(vals) / len(vals)
            std[name] = float(np.std(np.sort(vals)))
        else:
            mean[name] = std[name] = None
    return mean, std


def cross_validate(train_fn, ls: LabeledSet, k: int, seed: int, threshold: float = 0.5) -> CVResult:
    """Train on k-1 folds and score the held-out one, for every fold.

    ``train_fn(train_set)`` must return a fitted object with
    ``predict_proba(examples)``; it is called with the training folds only,
    so vocabulary and scaling are refitted per fold.
    """
    folds = kfold_partition(ls, k, seed)
    results = []
    for i, held in enumerate(folds):
        train = LabeledSet([e for j, f in enumerate(folds) if j != i for e in f], seed)
        n0, n1 = train.class_counts()
        if n0 == 0 or n1 == 0:
            raise EvaluationError(f"fold {i}: training folds lack one of the classes")
        clf = train_fn(train)
        _, m = evaluate(clf, held, threshold)
        results.append(m)
    mean, std = _aggregate(results)
    return CVResult(results, [f.ids for f in folds], mean, std)


@dataclass(frozen=True)
class TierAudit:
    total: int
    flagged: int

    @property
    def fraction(self) -> float:
        return self.flagged / self.total if self.total else 0.0


@dataclass
class HiddenAuditReport:
    threshold: float
    tiers: dict[TierLabel, TierAudit]
    flagged_ids: list[str]
    recall: float | None = None
    plants_audited: int = 0

    @property
    def total(self) -> int:
        return sum(t.total for t in self.tiers.values())

    @property
    def flagged(self) -> int:
        return sum(t.flagged for t in self.tiers.values())

    @property
    def global_fraction(self) -> float:
        return self.flagged / self.total if self.total else 0.0

    def as_dict(self):
        return {
            "threshold": self.threshold,
            "tiers": {
                t.title: {"total": a.total, "flagged": a.flagged, "fraction": a.fraction}
                for t, a in sorted(self.tiers.items(), reverse=True)
            },
            "total": self.total,
            "flagged": self.flagged,
            "global_fraction": self.global_fraction,
            "recall_vs_plants": self.recall,
            "plants_audited": self.plants_audited,
            "flagged_ids": self.flagged_ids,
        }


def detect_hidden(model, undeclared, threshold: float = 0.5, plants=None) -> HiddenAuditReport:
    """Flag undeclared posts whose sponsored probability reaches ``threshold``.

    ``undeclared`` holds examples the rule-based labeler marked
    non-sponsored. When ``plants`` (ids known to be hidden sponsorships) is
    given, the report includes recall over the plants present in the input.
    """
    exs = list(undeclared)
    counts = {}
    flagged_ids = []
    if exs:
        proba = model.predict_proba(exs)
        for e, p in zip(exs, proba):
            tot, fl = counts.get(e.tier, (0, 0))
            hit = bool(p >= threshold)
            counts[e.tier] = (tot + 1, fl + hit)
            if hit:
                flagged_ids.append(e.post_id)
    report = HiddenAuditReport(
        threshold=threshold,
        tiers={t: TierAudit(*counts[t]) for t in sorted(counts, reverse=True)},
        flagged_ids=flagged_ids,
    )
    if plants is not None:
        present = {e.post_id for e in exs} & set(plants)
        report.plants_audited = len(present)
        if present:
            report.recall = len(present & set(flagged_ids)) / len(present)
    return report


def _fmt(v):
    return "   n/a" if v is None else f"{v:6.2f}"


def format_metrics_table(rows: dict[str, Metrics | dict]) -> str:
    """Aligned text table: one row per model, columns Accuracy/Precision/Recall/F1."""
    names = list(rows)
    width = max([len("Model")] + [len(n) for n in names])
    lines = [f"{'Model':<{width}} | Accuracy Precision   Recall       F1"]
    lines.append("-" * width + "-+-" + "-" * 35)
    for n in names:
        m = rows[n]
        d = m.as_dict() if isinstance(m, Metrics) else m
        cells = "   ".join(_fmt(d.get(k)) for k in METRIC_NAMES)
        lines.append(f"{n:<{width}} |   {cells}")
    return "\n".join(lines) + "\n"
