"""Text + metadata recurrent classifier, trained with hand-written BPTT.

Architecture::

    token ids -> embedding -> LSTM (final hidden state, width H)
    [h_T, numeric] -> dense(D1, relu) -> dense(D2, relu) -> dense(1) -> sigmoid

Defaults follow H=64, D1=128, D2=64 over 11 numeric columns. Padding id 0
always embeds to the zero vector, and at a padded step the LSTM state is
carried over unchanged. With left padding that means leading pad columns
leave the state at zero, so a batch only runs from its first real token.
Gate blocks are stored in the order input, forget, output, candidate.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

PARAM_NAMES = ("embedding", "W", "U", "b", "W1", "b1", "W2", "b2", "w3", "b3")


class TrainingDivergedError(RuntimeError):
    pass


@dataclass(frozen=True)
class ModelShape:
    vocab_size: int = 5000
    embed_dim: int = 32
    hidden: int = 64
    dense1: int = 128
    dense2: int = 64
    n_numeric: int = 11


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 15
    batch_size: int = 32
    learning_rate: float = 0.05
    momentum: float = 0.9
    init_scale: float = 0.08
    forget_bias: float = 1.0
    clip_norm: float | None = 5.0
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be ≥ 0")
        if self.epochs < 1:
            raise ValueError("epochs must be ≥ 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be ≥ 1")


@dataclass
class ContextualModel:
    shape: ModelShape
    params: dict[str, np.ndarray]

    @classmethod
    def init(cls, shape: ModelShape, scale: float = 0.08, seed: int = 0, forget_bias: float = 1.0):
        """Embedding and LSTM weights ~ U(-scale, scale); dense layers use fan-in scaling.

        With U(-0.08, 0.08) everywhere the signal shrinks at every ReLU
        layer and a text-only task barely trains, so the dense layers get
        He-uniform limits (Glorot for the output unit). Biases start at
        zero except the forget gate.
        """
        rng = np.random.default_rng(seed)
        V, E, H, D1, D2, N = (shape.vocab_size, shape.embed_dim, shape.hidden,
                              shape.dense1, shape.dense2, shape.n_numeric)

        def u(lim, *dims):
            return rng.uniform(-lim, lim, size=dims)

        p = {
            "embedding": u(scale, V, E),
            "W": u(scale, E, 4 * H),
            "U": u(scale, H, 4 * H),
            "b": np.zeros(4 * H),
            "W1": u(math.sqrt(6 / (H + N)), H + N, D1),
            "b1": np.zeros(D1),
            "W2": u(math.sqrt(6 / D1), D1, D2),
            "b2": np.zeros(D2),
            "w3": u(math.sqrt(6 / (D2 + 1)), D2, 1),
            "b3": np.zeros(1),
        }
        p["embedding"][0] = 0.0
        p["b"][H:2 * H] = forget_bias
        return cls(shape, p)

    @classmethod
    def zeros(cls, shape: ModelShape):
        m = cls.init(shape)
        return cls(shape, {k: np.zeros_like(v) for k, v in m.params.items()})

    def n_params(self) -> int:
        return sum(v.size for v in self.params.values())

    def copy(self) -> "ContextualModel":
        return ContextualModel(self.shape, {k: v.copy() for k, v in self.params.items()})

    def to_dict(self) -> dict:
        return {"shape": asdict(self.shape), "params": {k: self.params[k].tolist() for k in PARAM_NAMES}}

    @classmethod
    def from_dict(cls, d) -> "ContextualModel":
        shape = ModelShape(**d["shape"])
        return cls(shape, {k: np.asarray(d["params"][k], dtype=np.float64) for k in PARAM_NAMES})


def _sigmoid(x):
    # tanh form never overflows
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _softplus(x):
    return np.maximum(x, 0) + np.log1p(np.exp(-np.abs(x)))


def _check_inputs(model, seqs, numeric):
    seqs = np.asarray(seqs)
    numeric = np.asarray(numeric, dtype=np.float64)
    if seqs.ndim == 1:
        seqs = seqs[None, :]
    if numeric.ndim == 1:
        numeric = numeric[None, :]
    if seqs.shape[0] != numeric.shape[0]:
        raise ValueError("sequence and numeric batch sizes differ")
    if numeric.shape[1] != model.shape.n_numeric:
        raise ValueError(f"numeric width must be {model.shape.n_numeric}, got {numeric.shape[1]}")
    if seqs.size and (seqs.min() < 0 or seqs.max() >= model.shape.vocab_size):
        raise ValueError(f"token index out of range for vocab_size {model.shape.vocab_size}")
    return seqs.astype(np.int64), numeric


def _forward(model, seqs, numeric, keep_cache):
    p = model.params
    H = model.shape.hidden
    nz = np.flatnonzero((seqs != 0).any(axis=0))
    seqs = seqs[:, nz[0]:] if nz.size else seqs[:, :0]
    B, T = seqs.shape
    mask = (seqs != 0).astype(np.float64)[..., None]
    X = p["embedding"][seqs] * mask
    XW = X @ p["W"] + p["b"]
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    steps = [] if keep_cache else None
    U = p["U"]
    for t in range(T):
        z = XW[:, t] + h @ U
        ifo = _sigmoid(z[:, :3 * H])
        g = np.tanh(z[:, 3 * H:])
        i, f, o = ifo[:, :H], ifo[:, H:2 * H], ifo[:, 2 * H:]
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        h_new = o * tc
        if keep_cache:
            steps.append((i, f, o, g, c, tc, h))
        m = mask[:, t]
        if m.all():
            h, c = h_new, c_new
        else:
            h = np.where(m > 0, h_new, h)
            c = np.where(m > 0, c_new, c)
    a0 = np.concatenate([h, numeric], axis=1)
    z1 = a0 @ p["W1"] + p["b1"]
    a1 = np.maximum(z1, 0)
    z2 = a1 @ p["W2"] + p["b2"]
    a2 = np.maximum(z2, 0)
    logit = (a2 @ p["w3"])[:, 0] + p["b3"][0]
    cache = (seqs, mask, X, steps, a0, z1, a1, z2, a2) if keep_cache else None
    return logit, cache


def predict_logits(model: ContextualModel, seqs, numeric) -> np.ndarray:
    seqs, numeric = _check_inputs(model, seqs, numeric)
    return _forward(model, seqs, numeric, False)[0]


def forward(model: ContextualModel, seqs, numeric):
    """Sponsored probability; a scalar for one example, an array for a batch."""
    single = np.asarray(seqs).ndim == 1
    prob = _sigmoid(predict_logits(model, seqs, numeric))
    return float(prob[0]) if single else prob


def loss_and_grads(model: ContextualModel, seqs, numeric, labels, want_grads=True):
    """Mean binary cross-entropy over the batch and its gradient for every parameter."""
    seqs, numeric = _check_inputs(model, seqs, numeric)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    logit, cache = _forward(model, seqs, numeric, want_grads)
    B = logit.shape[0]
    loss = float(np.mean(_softplus(logit) - y * logit))
    if not want_grads:
        return loss, None

    p = model.params
    H = model.shape.hidden
    seqs, mask, X, steps, a0, z1, a1, z2, a2 = cache
    g = {}
    dlogit = (_sigmoid(logit) - y) / B
    g["w3"] = a2.T @ dlogit[:, None]
    g["b3"] = np.array([dlogit.sum()])
    dz2 = (dlogit[:, None] @ p["w3"].T) * (z2 > 0)
    g["W2"] = a1.T @ dz2
    g["b2"] = dz2.sum(axis=0)
    dz1 = (dz2 @ p["W2"].T) * (z1 > 0)
    g["W1"] = a0.T @ dz1
    g["b1"] = dz1.sum(axis=0)
    dh = (dz1 @ p["W1"].T)[:, :H]

    T = seqs.shape[1]
    U = p["U"]
    dXW = np.empty((B, T, 4 * H))
    h_prev_all = np.empty((B, T, H))
    dc = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        i, f, o, gg, c_prev, tc, h_prev = steps[t]
        h_prev_all[:, t] = h_prev
        m = mask[:, t]
        full = bool(m.all())
        dhn = dh if full else dh * m
        dcn = (dc if full else dc * m) + dhn * o * (1.0 - tc * tc)
        dz = dXW[:, t]
        dz[:, :H] = dcn * gg * i * (1.0 - i)
        dz[:, H:2 * H] = dcn * c_prev * f * (1.0 - f)
        dz[:, 2 * H:3 * H] = dhn * tc * o * (1.0 - o)
        dz[:, 3 * H:] = dcn * i * (1.0 - gg * gg)
        if full:
            dh = dz @ U.T
            dc = dcn * f
        else:
            keep = 1.0 - m
            dh = dz @ U.T + dh * keep
            dc = dcn * f + dc * keep
    dU = h_prev_all.reshape(-1, H).T @ dXW.reshape(-1, 4 * H)
    E = X.shape[2]
    g["U"] = dU
    g["W"] = X.reshape(-1, E).T @ dXW.reshape(-1, 4 * H)
    g["b"] = dXW.sum(axis=(0, 1))
    dX = (dXW @ p["W"].T) * mask
    dEmb = np.zeros_like(p["embedding"])
    np.add.at(dEmb, seqs.reshape(-1), dX.reshape(-1, E))
    g["embedding"] = dEmb
    return loss, g


@dataclass
class TrainResult:
    model: ContextualModel
    loss_trace: list[tuple[int, int, float]] = field(default_factory=list)

    def epoch_losses(self) -> list[float]:
        by_epoch: dict[int, list[float]] = {}
        for e, _, loss in self.loss_trace:
            by_epoch.setdefault(e, []).append(loss)
        return [float(np.mean(v)) for _, v in sorted(by_epoch.items())]


def train_contextual(seqs, numeric, labels, config: TrainConfig = TrainConfig(),
                     shape: ModelShape | None = None, model: ContextualModel | None = None) -> TrainResult:
    """Momentum SGD on mean BCE over shuffled mini-batches.

    ``seqs`` are encoded id matrices and ``numeric`` already standardized.
    Raises :class:`TrainingDivergedError` if a batch loss is not finite.
    """
    seqs = np.asarray(seqs, dtype=np.int64)
    numeric = np.asarray(numeric, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if model is None:
        if shape is None:
            shape = ModelShape(vocab_size=int(seqs.max(initial=1)) + 1, n_numeric=numeric.shape[1])
        model = ContextualModel.init(shape, config.init_scale, config.seed, config.forget_bias)
    else:
        model = model.copy()
    rng = np.random.default_rng([config.seed, 1])
    velocity = {k: np.zeros_like(v) for k, v in model.params.items()}
    trace = []
    n = len(labels)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for b, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start:start + config.batch_size]
            # overflow surfaces as a non-finite loss, reported just below
            with np.errstate(over="ignore", invalid="ignore"):
                loss, grads = loss_and_grads(model, seqs[idx], numeric[idx], labels[idx])
            if not math.isfinite(loss):
                raise TrainingDivergedError(f"loss became non-finite at epoch {epoch}, batch {b}")
            trace.append((epoch, b, loss))
            if config.clip_norm is not None:
                norm = math.sqrt(sum(float(np.sum(gr * gr)) for gr in grads.values()))
                if norm > config.clip_norm:
                    scale = config.clip_norm / norm
                    for gr in grads.values():
                        gr *= scale
            for k, gr in grads.items():
                v = velocity[k]
                v *= config.momentum
                v -= config.learning_rate * gr
                model.params[k] += v
            model.params["embedding"][0] = 0.0
    return TrainResult(model, trace)


def _loss_and_pattern(model, seqs, numeric, y):
    logit, cache = _forward(model, seqs, numeric, True)
    z1, z2 = cache[5], cache[7]
    loss = float(np.mean(_softplus(logit) - y * logit))
    return loss, np.concatenate([(z1 > 0).ravel(), (z2 > 0).ravel()])


@dataclass
class GradientCheck:
    max_rel_error: float
    skipped: int
    checked: int
    per_param: dict = field(default_factory=dict)


def gradient_check(model: ContextualModel, seqs, numeric, labels, epsilon: float = 1e-4,
                   return_details: bool = False, floor: float = 1e-7):
    """Largest relative gap between backprop and central differences over all parameters.

    The error of one entry is ``|a - n| / max(|a|, |n|, floor)``. Central
    differences carry roughly 1e-12 of rounding noise, so gradient entries
    far below ``floor`` cannot be resolved in relative terms and are
    compared on an absolute scale instead.

    An entry whose +/-epsilon perturbation switches any ReLU on or off has
    no derivative to compare against; it is skipped and counted. With
    ``return_details`` a :class:`GradientCheck` is returned, whose
    ``per_param`` maps each name to ``(analytic, numeric, skipped_mask)``.
    """
    if not 1e-6 <= epsilon <= 1e-3:
        raise ValueError("epsilon must be in [1e-6, 1e-3]")
    seqs, numeric = _check_inputs(model, seqs, numeric)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    _, grads = loss_and_grads(model, seqs, numeric, y)
    _, base = _loss_and_pattern(model, seqs, numeric, y)
    work = model.copy()
    worst = 0.0
    skipped = checked = 0
    per_param = {}
    for name in PARAM_NAMES:
        param = work.params[name]
        numeric_grad = np.zeros_like(param)
        kink = np.zeros(param.shape, dtype=bool)
        flat = param.reshape(-1)
        for j in range(flat.size):
            old = flat[j]
            flat[j] = old + epsilon
            lp, pat_p = _loss_and_pattern(work, seqs, numeric, y)
            flat[j] = old - epsilon
            lm, pat_m = _loss_and_pattern(work, seqs, numeric, y)
            flat[j] = old
            numeric_grad.reshape(-1)[j] = (lp - lm) / (2 * epsilon)
            kink.reshape(-1)[j] = not (np.array_equal(pat_p, base) and np.array_equal(pat_m, base))
        a = grads[name]
        scale = np.maximum(np.maximum(np.abs(a), np.abs(numeric_grad)), floor)
        rel = np.where(kink, 0.0, np.abs(a - numeric_grad) / scale)
        per_param[name] = (a, numeric_grad, kink)
        skipped += int(kink.sum())
        checked += int(kink.size - kink.sum())
        worst = max(worst, float(rel.max(initial=0.0)))
    if return_details:
        return GradientCheck(worst, skipped, checked, per_param)
    return worst
