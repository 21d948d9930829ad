import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import scalar_forward
from sponsorscope.classifiers import (
    ContextualClassifier,
    ContextualModel,
    ForestClassifier,
    ForestModel,
    ModelShape,
    TrainConfig,
    TrainingDivergedError,
    Tree,
    forward,
    gradient_check,
    hash_text_bits,
    load_classifier,
    loss_and_grads,
    make_classifier,
    predict_forest,
    save_classifier,
    train_contextual,
    train_forest,
)
from sponsorscope.core import TierLabel
from sponsorscope.dataset import Example, LabeledSet

TINY = ModelShape(vocab_size=8, embed_dim=4, hidden=8, dense1=16, dense2=8, n_numeric=3)


def tiny_batch(seed, B=4, T=6):
    rng = np.random.default_rng(seed)
    seqs = rng.integers(0, TINY.vocab_size, size=(B, T))
    seqs[0, :3] = 0
    seqs[-1, :] = 0
    return seqs, rng.standard_normal((B, TINY.n_numeric)), np.arange(B) % 2


# contextual model ----------------------------------------------------------

def test_default_architecture_widths():
    m = ContextualModel.init(ModelShape())
    p = m.params
    assert p["U"].shape == (64, 256)
    assert p["W1"].shape == (64 + 11, 128)
    assert p["W2"].shape == (128, 64)
    assert p["w3"].shape == (64, 1)
    assert p["embedding"].shape == (5000, 32)


def test_zero_model_outputs_half():
    m = ContextualModel.zeros(TINY)
    assert forward(m, np.array([1, 2, 3]), np.ones(3)) == 0.5
    assert forward(m, np.zeros(5, dtype=int), np.zeros(3)) == 0.5


def test_hand_computed_forward():
    # vocab 5, embed 2, max_len 3; one hidden unit, one unit per dense layer, no numeric inputs
    shape = ModelShape(vocab_size=5, embed_dim=2, hidden=1, dense1=1, dense2=1, n_numeric=0)
    m = ContextualModel.zeros(shape)
    p = m.params
    p["embedding"][2] = [1.0, -0.5]
    p["embedding"][3] = [0.25, 2.0]
    p["W"][:, :] = [[0.5, -1.0, 2.0, 1.5], [0.2, 0.3, -0.4, 0.1]]
    p["U"][:, :] = [[0.7, -0.2, 0.6, -1.1]]
    p["b"][:] = [0.1, 1.0, -0.3, 0.05]
    p["W1"][:] = [[2.0]]
    p["b1"][:] = [0.1]
    p["W2"][:] = [[-1.5]]
    p["b2"][:] = [0.8]
    p["w3"][:] = [[3.0]]
    p["b3"][:] = [-0.2]

    def sig(x):
        return 1 / (1 + math.exp(-x))

    # token 2, from zero state
    x = (1.0, -0.5)
    zi = 0.1 + 1.0 * 0.5 + -0.5 * 0.2
    zf = 1.0 + 1.0 * -1.0 + -0.5 * 0.3
    zo = -0.3 + 1.0 * 2.0 + -0.5 * -0.4
    zg = 0.05 + 1.0 * 1.5 + -0.5 * 0.1
    c1 = sig(zf) * 0.0 + sig(zi) * math.tanh(zg)
    h1 = sig(zo) * math.tanh(c1)
    # token 3
    x = (0.25, 2.0)
    zi = 0.1 + x[0] * 0.5 + x[1] * 0.2 + h1 * 0.7
    zf = 1.0 + x[0] * -1.0 + x[1] * 0.3 + h1 * -0.2
    zo = -0.3 + x[0] * 2.0 + x[1] * -0.4 + h1 * 0.6
    zg = 0.05 + x[0] * 1.5 + x[1] * 0.1 + h1 * -1.1
    c2 = sig(zf) * c1 + sig(zi) * math.tanh(zg)
    h2 = sig(zo) * math.tanh(c2)
    a1 = max(0.0, 2.0 * h2 + 0.1)
    a2 = max(0.0, -1.5 * a1 + 0.8)
    expected = sig(3.0 * a2 - 0.2)

    got = forward(m, np.array([0, 2, 3]), np.zeros(0))
    assert abs(got - expected) <= 1e-12
    assert abs(scalar_forward(p, [0, 2, 3], []) - expected) <= 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_forward_matches_scalar_oracle(seed):
    m = ContextualModel.init(TINY, scale=0.6, seed=seed)
    m.params["b"] += 0.3
    seqs, num, _ = tiny_batch(seed)
    batch = forward(m, seqs, num)
    for i in range(len(seqs)):
        assert abs(batch[i] - scalar_forward(m.params, seqs[i].tolist(), num[i].tolist())) <= 1e-12


def test_padding_positions_do_not_matter():
    m = ContextualModel.init(TINY, scale=0.5, seed=1)
    num = np.ones(3)
    a = forward(m, np.array([0, 0, 0, 4, 5]), num)
    b = forward(m, np.array([4, 0, 5]), num)
    c = forward(m, np.array([4, 5]), num)
    assert a == pytest.approx(c, abs=1e-15) and b == pytest.approx(c, abs=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.floats(-1e3, 1e3))
def test_forward_stays_in_open_interval(seed, scale):
    m = ContextualModel.init(TINY, scale=0.5, seed=seed)
    seqs, num, _ = tiny_batch(seed)
    out = forward(m, seqs, num * scale)
    assert np.all((out >= 0) & (out <= 1)) and np.all(np.isfinite(out))


def test_forward_rejects_bad_inputs():
    m = ContextualModel.init(TINY)
    with pytest.raises(ValueError, match="vocab_size"):
        forward(m, np.array([8]), np.zeros(3))
    with pytest.raises(ValueError, match="numeric width"):
        forward(m, np.array([1]), np.zeros(4))


def test_gradient_check_small_models():
    worst = 0.0
    for seed in range(10):
        m = ContextualModel.init(TINY, scale=0.5, seed=seed)
        seqs, num, y = tiny_batch(seed + 100)
        res = gradient_check(m, seqs, num, y, 1e-4, return_details=True)
        assert res.skipped <= 0.02 * (res.skipped + res.checked)
        worst = max(worst, res.max_rel_error)
    assert worst < 1e-4


def test_gradient_check_skips_only_relu_crossings():
    m = ContextualModel.init(TINY, scale=0.5, seed=9)
    seqs, num, y = tiny_batch(109)
    res = gradient_check(m, seqs, num, y, return_details=True)
    a, n, kink = res.per_param["b1"]
    # the skipped bias entry really sits on a kink: the two one-sided slopes disagree
    assert kink.any()
    j = int(np.flatnonzero(kink)[0])
    assert abs(a[j] - n[j]) > 1e-4 * max(abs(a[j]), abs(n[j]))


def test_unused_vocab_row_has_zero_gradient():
    m = ContextualModel.init(TINY, scale=0.5, seed=3)
    seqs = np.array([[1, 2, 3], [0, 2, 2]])
    details = gradient_check(m, seqs, np.zeros((2, 3)), [0, 1], return_details=True)
    analytic, numeric, _ = details.per_param["embedding"]
    for row in (0, 4, 5, 6, 7):
        assert np.all(np.abs(analytic[row]) < 1e-10) and np.all(np.abs(numeric[row]) < 1e-10)


def test_gradient_check_epsilon_range():
    m = ContextualModel.init(TINY)
    with pytest.raises(ValueError):
        gradient_check(m, np.array([[1]]), np.zeros((1, 3)), [1], epsilon=0.1)


def predictive_token_set(n=500, seed=0):
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 2
    seqs = rng.integers(3, 30, size=(n, 10))
    seqs[y == 1, rng.integers(0, 10, size=int(y.sum()))] = 2
    seqs[(y == 0)[:, None] & (seqs == 2)] = 3
    return seqs, rng.standard_normal((n, 3)), y


def test_contextual_learns_predictive_token():
    seqs, num, y = predictive_token_set()
    res = train_contextual(seqs, num, y, TrainConfig(epochs=20, seed=1), ModelShape(vocab_size=30, n_numeric=3))
    acc = np.mean((forward(res.model, seqs, num) >= 0.5) == y)
    assert acc >= 0.99
    losses = res.epoch_losses()
    assert losses[-1] < losses[0]


def test_zero_learning_rate_changes_nothing():
    seqs, num, y = predictive_token_set(64)
    shape = ModelShape(vocab_size=30, embed_dim=4, hidden=4, dense1=4, dense2=4, n_numeric=3)
    init = ContextualModel.init(shape, seed=5)
    res = train_contextual(seqs, num, y, TrainConfig(epochs=2, learning_rate=0.0, seed=5), model=init)
    for k in init.params:
        assert np.array_equal(init.params[k], res.model.params[k])
    # two equal batches per epoch, so each epoch mean is the full-data loss
    first, second = res.epoch_losses()
    assert first == pytest.approx(second, abs=1e-12)


def test_training_is_bit_reproducible():
    seqs, num, y = predictive_token_set(96)
    shape = ModelShape(vocab_size=30, embed_dim=4, hidden=4, dense1=4, dense2=4, n_numeric=3)
    a = train_contextual(seqs, num, y, TrainConfig(epochs=2, seed=9), shape)
    b = train_contextual(seqs, num, y, TrainConfig(epochs=2, seed=9), shape)
    for k in a.model.params:
        assert np.array_equal(a.model.params[k], b.model.params[k])
    assert a.loss_trace == b.loss_trace


def test_divergence_is_reported():
    seqs, num, y = predictive_token_set(64)
    shape = ModelShape(vocab_size=30, embed_dim=4, hidden=4, dense1=4, dense2=4, n_numeric=3)
    with pytest.raises(TrainingDivergedError, match=r"epoch 0, batch \d+"):
        train_contextual(seqs, num * np.inf, y, TrainConfig(epochs=1), shape)


def test_train_config_invariants():
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=-1)


def test_model_dict_roundtrip():
    m = ContextualModel.init(TINY, seed=2)
    m2 = ContextualModel.from_dict(m.to_dict())
    assert all(np.array_equal(m.params[k], m2.params[k]) for k in m.params)


def test_loss_matches_direct_formula():
    m = ContextualModel.init(TINY, scale=0.4, seed=6)
    seqs, num, y = tiny_batch(6)
    loss, _ = loss_and_grads(m, seqs, num, y, want_grads=False)
    p = np.clip(forward(m, seqs, num), 1e-300, 1)
    direct = -np.mean(y * np.log(p) + (1 - y) * np.log(1 - p))
    assert loss == pytest.approx(direct, rel=1e-10)


# forest -------------------------------------------------------------------

def test_forest_single_label():
    X = np.random.default_rng(0).standard_normal((20, 3))
    m = train_forest(X, np.ones(20), n_trees=5)
    assert np.all(predict_forest(m, X) == 1.0)


def test_forest_separable_toy():
    rng = np.random.default_rng(1)
    X = rng.uniform(-1, 1, size=(200, 2))
    y = (X[:, 0] + 0.5 * X[:, 1] > 0).astype(float)
    m = train_forest(X, y, n_trees=25, seed=3)
    assert np.mean((predict_forest(m, X) >= 0.5) == y) == 1.0


def test_forest_is_deterministic_and_order_invariant():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((80, 5))
    y = (X[:, 0] > 0).astype(float)
    a = train_forest(X, y, n_trees=8, seed=4)
    b = train_forest(X, y, n_trees=8, seed=4)
    assert a.to_dict() == b.to_dict()
    rev = ForestModel(list(reversed(a.trees)), a.n_features)
    assert np.allclose(predict_forest(rev, X), predict_forest(a, X), atol=1e-15)


def test_forest_averaging_examples():
    leaf = lambda v: Tree(np.array([-1]), np.array([0.0]), np.array([-1]), np.array([-1]), np.array([v]))
    assert predict_forest(ForestModel([leaf(0.7)], 2), np.zeros(2))[0] == pytest.approx(0.7)
    assert predict_forest(ForestModel([leaf(0.2), leaf(0.8)], 2), np.zeros(2))[0] == pytest.approx(0.5)


def test_forest_probabilities_in_range_on_random_inputs():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((100, 4))
    m = train_forest(X, (X[:, 1] > 0.3).astype(float), n_trees=10)
    p = predict_forest(m, rng.standard_normal((1000, 4)) * 10)
    assert np.all((p >= 0) & (p <= 1))


def test_forest_structure_invariants():
    rng = np.random.default_rng(6)
    X = rng.standard_normal((60, 3))
    m = train_forest(X, (X[:, 2] > 0).astype(float), n_trees=4, max_depth=3)
    for t in m.trees:
        internal = t.feature >= 0
        assert np.all(t.feature[internal] < 3)
        assert np.all((t.value >= 0) & (t.value <= 1))


def test_forest_constant_features_flagged():
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        m = train_forest(np.ones((10, 3)), np.array([0, 1] * 5), n_trees=3)
    assert m.degenerate and any("constant" in str(x.message) for x in w)
    assert np.all(predict_forest(m, np.ones((2, 3))) <= 1)


def test_forest_dimension_mismatch():
    m = train_forest(np.eye(4), np.array([0, 1, 0, 1]), n_trees=2)
    with pytest.raises(ValueError, match="expected 4 features"):
        predict_forest(m, np.zeros((1, 3)))


def test_hash_bits():
    bits = hash_text_bits(np.array([[0, 0, 5, 5], [0, 0, 0, 0]]), 16)
    assert bits.shape == (2, 16)
    assert bits[0].sum() == 1 and bits[1].sum() == 0


# wrappers -----------------------------------------------------------------

def toy_set(n=120, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        y = i % 2
        toks = ["deal" if y else "sunset", "photo", f"w{rng.integers(20)}"]
        out.append(Example(f"p{i:04d}", "u", TierLabel.NANO, y, tuple(toks), tuple(rng.standard_normal(11))))
    return LabeledSet(out)


@pytest.mark.parametrize("kind, kw", [
    ("forest", dict(n_trees=10)),
    ("contextual", dict(config=TrainConfig(epochs=3), hidden=8, dense1=8, dense2=8, embed_dim=4)),
])
def test_classifier_save_load(tmp_path, kind, kw):
    ls = toy_set()
    clf = make_classifier(kind, **kw).fit(ls)
    path = tmp_path / "m.json"
    save_classifier(clf, path)
    back = load_classifier(path)
    assert np.array_equal(back.predict_proba(ls), clf.predict_proba(ls))
    assert back.featurizer.fitted_on == frozenset(ls.ids)


def test_wrappers_learn_the_toy_task():
    ls = toy_set()
    assert np.mean((ForestClassifier(n_trees=10).fit(ls).predict_proba(ls) >= 0.5) == ls.labels) == 1.0
    ctx = ContextualClassifier(TrainConfig(epochs=20)).fit(ls)
    assert np.mean((ctx.predict_proba(ls) >= 0.5) == ls.labels) >= 0.95


def test_make_classifier_unknown():
    with pytest.raises(ValueError, match="unknown model kind"):
        make_classifier("svm")


def test_load_rejects_other_json(tmp_path):
    (tmp_path / "x.json").write_text('{"format": "other"}')
    with pytest.raises(ValueError, match="not a saved model"):
        load_classifier(tmp_path / "x.json")
