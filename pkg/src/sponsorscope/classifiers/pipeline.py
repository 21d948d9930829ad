"""Fit/predict wrappers that pair each model with its own fitted Featurizer."""

from __future__ import annotations

import json
from dataclasses import asdict

import numpy as np

from ..dataset import Featurizer, LabeledSet
from .contextual import ContextualModel, ModelShape, TrainConfig, forward, train_contextual
from .forest import HASH_BINS, ForestModel, hash_text_bits, predict_forest, train_forest

FORMAT = "sponsorscope-model"
VERSION = 1


class ContextualClassifier:
    kind = "contextual"

    def __init__(self, config: TrainConfig = TrainConfig(), vocab_size: int = 5000, max_len: int = 60,
                 embed_dim: int = 32, hidden: int = 64, dense1: int = 128, dense2: int = 64):
        self.config = config
        self.vocab_size = vocab_size
        self.max_len = max_len
        self.dims = dict(embed_dim=embed_dim, hidden=hidden, dense1=dense1, dense2=dense2)
        self.featurizer: Featurizer | None = None
        self.model: ContextualModel | None = None
        self.loss_trace: list = []

    def fit(self, train: LabeledSet) -> "ContextualClassifier":
        self.featurizer = Featurizer.fit(train, self.vocab_size, self.max_len)
        seqs, num = self.featurizer.transform(train)
        shape = ModelShape(vocab_size=len(self.featurizer.vocab), n_numeric=num.shape[1], **self.dims)
        result = train_contextual(seqs, num, train.labels, self.config, shape)
        self.model = result.model
        self.loss_trace = result.loss_trace
        return self

    def predict_proba(self, examples) -> np.ndarray:
        seqs, num = self.featurizer.transform(examples)
        if len(seqs) == 0:
            return np.zeros(0)
        return np.asarray(forward(self.model, seqs, num), dtype=np.float64).reshape(-1)

    def to_dict(self):
        return {
            "format": FORMAT, "version": VERSION, "kind": self.kind,
            "config": asdict(self.config),
            "settings": {"vocab_size": self.vocab_size, "max_len": self.max_len, **self.dims},
            "featurizer": self.featurizer.to_dict(),
            "model": self.model.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        obj = cls(TrainConfig(**d["config"]), **d["settings"])
        obj.featurizer = Featurizer.from_dict(d["featurizer"])
        obj.model = ContextualModel.from_dict(d["model"])
        return obj


class ForestClassifier:
    kind = "forest"

    def __init__(self, n_trees: int = 100, max_depth: int = 12, max_features="sqrt", bootstrap: bool = True,
                 seed: int = 0, vocab_size: int = 5000, max_len: int = 60, hash_bins: int = HASH_BINS):
        self.params = dict(n_trees=n_trees, max_depth=max_depth, max_features=max_features,
                           bootstrap=bootstrap, seed=seed)
        self.vocab_size = vocab_size
        self.max_len = max_len
        self.hash_bins = hash_bins
        self.featurizer: Featurizer | None = None
        self.model: ForestModel | None = None

    def design_matrix(self, examples) -> np.ndarray:
        seqs, num = self.featurizer.transform(examples)
        return np.hstack([num, hash_text_bits(seqs, self.hash_bins)])

    def fit(self, train: LabeledSet) -> "ForestClassifier":
        self.featurizer = Featurizer.fit(train, self.vocab_size, self.max_len)
        self.model = train_forest(self.design_matrix(train), train.labels, **self.params)
        return self

    def predict_proba(self, examples) -> np.ndarray:
        X = self.design_matrix(examples)
        if len(X) == 0:
            return np.zeros(0)
        return predict_forest(self.model, X)

    def to_dict(self):
        return {
            "format": FORMAT, "version": VERSION, "kind": self.kind,
            "config": self.params,
            "settings": {"vocab_size": self.vocab_size, "max_len": self.max_len, "hash_bins": self.hash_bins},
            "featurizer": self.featurizer.to_dict(),
            "model": self.model.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        obj = cls(**d["config"], **d["settings"])
        obj.featurizer = Featurizer.from_dict(d["featurizer"])
        obj.model = ForestModel.from_dict(d["model"])
        return obj


_KINDS = {"contextual": ContextualClassifier, "forest": ForestClassifier}


def make_classifier(kind: str, **kwargs):
    try:
        return _KINDS[kind](**kwargs)
    except KeyError:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {sorted(_KINDS)}") from None


def save_classifier(clf, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(clf.to_dict(), fh, separators=(",", ":"))
        fh.write("\n")


def load_classifier(path):
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    if d.get("format") != FORMAT:
        raise ValueError(f"{path} is not a saved model")
    if d.get("version") != VERSION:
        raise ValueError(f"unsupported model file version {d.get('version')}")
    return _KINDS[d["kind"]].from_dict(d)
