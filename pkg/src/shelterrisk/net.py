"""The RNN-MLP risk model, written against numpy only.

Architecture: the dynamic block of each example is reshaped to T_x x S and
fed oldest-step-first through a single LSTM layer; the hidden states of all
T_x steps are flattened, concatenated with the static block, and passed
through a stack of rectified dense layers (inverted dropout after each
activation, L2 on the dense weight matrices) to a sigmoid output.

Training minimizes a differentiable weighted-F1 surrogate by default:

    L = 1 - 2PR / ((2 - 2/(w_R+1)) P + (2/(w_R+1)) R)

with probabilistic precision P = sum(y*yhat)/sum(yhat) and recall
R = sum(y*yhat)/sum(y), epsilon-smoothed. w_R > 1 trades precision for
recall. Plain and class-weighted BCE are available for comparisons.

Gradients are explicit (full backpropagation through time); the optimizer
is Adam. Everything is deterministic given (config, seed).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .pipeline import Dataset, StandardScaler
from .schema import FeatureSchema

LOSS_EPS = 1e-8
LOSSES = ("weighted_f1", "bce", "weighted_bce")


@dataclass(frozen=True)
class ModelConfig:
    lstm_units: int = 4
    fc_layers: int = 6
    fc_first_width: int = 64
    fc_rest_width: int = 32
    dropout_rate: float = 0.44
    l2_gamma: float = 1.78e-3
    learning_rate: float = 1e-3
    batch_size: int = 1024
    max_epochs: int = 300
    patience: int = 15
    recall_weight: float = 4.5
    threshold: float = 0.5
    seed: int = 0
    loss: str = "weighted_f1"
    ablate_dynamic: bool = False
    dtype: str = "float32"

    def __post_init__(self):
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.l2_gamma < 0:
            raise ValueError("l2_gamma must be >= 0")
        if self.recall_weight <= 0:
            raise ValueError("recall_weight must be > 0")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must be in (0, 1)")
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


@dataclass
class ModelParams:
    """All trainable weights, plus the layout metadata needed to run them."""

    lstm_W: np.ndarray  # (n_services + H, 4H), gate order i|f|o|g
    lstm_b: np.ndarray  # (4H,)
    dense_W: list[np.ndarray]
    dense_b: list[np.ndarray]
    out_w: np.ndarray  # (last_width,)
    out_b: np.ndarray  # (1,)
    meta: dict

    def names(self) -> list[str]:
        out = ["lstm_W", "lstm_b"]
        for i in range(len(self.dense_W)):
            out += [f"dense{i}_W", f"dense{i}_b"]
        return out + ["out_w", "out_b"]

    def as_list(self) -> list[np.ndarray]:
        out = [self.lstm_W, self.lstm_b]
        for W, b in zip(self.dense_W, self.dense_b):
            out += [W, b]
        return out + [self.out_w, self.out_b]

    @classmethod
    def from_list(cls, arrays: Sequence[np.ndarray], meta: dict) -> "ModelParams":
        arrays = list(arrays)
        n_dense = (len(arrays) - 4) // 2
        return cls(
            lstm_W=arrays[0],
            lstm_b=arrays[1],
            dense_W=[arrays[2 + 2 * i] for i in range(n_dense)],
            dense_b=[arrays[3 + 2 * i] for i in range(n_dense)],
            out_w=arrays[-2],
            out_b=arrays[-1],
            meta=dict(meta),
        )

    def copy(self) -> "ModelParams":
        return ModelParams.from_list([a.copy() for a in self.as_list()], self.meta)

    def astype(self, dtype) -> "ModelParams":
        return ModelParams.from_list([a.astype(dtype) for a in self.as_list()], self.meta)

    def to_dict(self) -> dict:
        return {
            "lstm_W": self.lstm_W.tolist(),
            "lstm_b": self.lstm_b.tolist(),
            "dense_W": [W.tolist() for W in self.dense_W],
            "dense_b": [b.tolist() for b in self.dense_b],
            "out_w": self.out_w.tolist(),
            "out_b": self.out_b.tolist(),
            "meta": dict(self.meta),
        }

    @classmethod
    def from_dict(cls, d: dict, dtype=np.float64) -> "ModelParams":
        return cls(
            lstm_W=np.asarray(d["lstm_W"], dtype=dtype),
            lstm_b=np.asarray(d["lstm_b"], dtype=dtype),
            dense_W=[np.asarray(W, dtype=dtype) for W in d["dense_W"]],
            dense_b=[np.asarray(b, dtype=dtype) for b in d["dense_b"]],
            out_w=np.asarray(d["out_w"], dtype=dtype),
            out_b=np.asarray(d["out_b"], dtype=dtype),
            meta=dict(d["meta"]),
        )


@dataclass
class TrainReport:
    train_losses: list[float]  # per epoch; includes the L2 penalty
    val_losses: list[float]  # per epoch; data loss only
    best_epoch: int  # 1-based epoch with minimum validation loss
    stopped_epoch: int

    def to_dict(self) -> dict:
        return {
            "train_losses": self.train_losses,
            "val_losses": self.val_losses,
            "best_epoch": self.best_epoch,
            "stopped_epoch": self.stopped_epoch,
        }


# ---------------------------------------------------------------------------
# Initialization
# ---------------------------------------------------------------------------


def _uniform(rng, fan_in: int, shape, dtype) -> np.ndarray:
    lim = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-lim, lim, size=shape).astype(dtype)


def _dense_widths(cfg: ModelConfig) -> list[int]:
    return [cfg.fc_first_width] + [cfg.fc_rest_width] * (cfg.fc_layers - 1)


def init_params(cfg: ModelConfig, schema: FeatureSchema, train_positive_fraction: float) -> ModelParams:
    """Seeded uniform fan-in init; output bias = ln(p / (1 - p))."""
    p = train_positive_fraction
    if not 0.0 < p < 1.0:
        raise ValueError(f"train positive fraction must be in (0, 1), got {p}")
    rng = np.random.default_rng(cfg.seed)
    H, S, T = cfg.lstm_units, schema.n_services, schema.sequence_length
    dtype = np.float64

    lstm_W = _uniform(rng, S + H, (S + H, 4 * H), dtype)
    lstm_b = np.zeros(4 * H, dtype=dtype)
    lstm_b[H : 2 * H] = 1.0  # forget-gate bias starts open

    widths = _dense_widths(cfg)
    fan = T * H + schema.static_size
    dense_W, dense_b = [], []
    for w in widths:
        dense_W.append(_uniform(rng, fan, (fan, w), dtype))
        # small positive bias keeps rectifier units initially active and the
        # pre-activations away from the exact ReLU kink
        dense_b.append(np.full(w, 0.01, dtype=dtype))
        fan = w
    out_w = _uniform(rng, fan, (fan,), dtype)
    out_b = np.array([np.log(p / (1.0 - p))], dtype=dtype)

    meta = {
        "lstm_units": H,
        "n_services": S,
        "sequence_length": T,
        "static_size": schema.static_size,
        "vector_length": schema.vector_length,
        "dropout_rate": cfg.dropout_rate,
        "ablate_dynamic": cfg.ablate_dynamic,
    }
    return ModelParams(lstm_W, lstm_b, dense_W, dense_b, out_w, out_b, meta)


# ---------------------------------------------------------------------------
# Forward
# ---------------------------------------------------------------------------


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # clipping at |z| = 60 changes nothing at float precision and keeps exp finite
    return 1.0 / (1.0 + np.exp(-np.clip(z, -60.0, 60.0)))


def _sample_masks(rng, widths, batch, rate, dtype) -> list[np.ndarray]:
    """Inverted-dropout masks, pre-scaled: entries are 0 or 1/(1 - rate)."""
    scale = 1.0 / (1.0 - rate)
    return [(rng.random((batch, w)) >= rate).astype(dtype) * dtype.type(scale)
            for w in widths]


def _forward(params: ModelParams, X: np.ndarray, masks: list[np.ndarray] | None):
    """Batched forward pass; returns (probabilities, cache for backprop)."""
    meta = params.meta
    H, S, T = meta["lstm_units"], meta["n_services"], meta["sequence_length"]
    static_size = meta["static_size"]
    B = X.shape[0]
    if X.shape[1] != meta["vector_length"]:
        raise ValueError(
            f"input width {X.shape[1]} != schema vector length {meta['vector_length']}"
        )
    if meta.get("ablate_dynamic"):
        X = X.copy()
        X[:, static_size:] = 0.0

    dtype = params.lstm_W.dtype
    statics = X[:, :static_size]
    # layout row 0 is the current step; the LSTM consumes oldest first
    dyn = X[:, static_size:].reshape(B, T, S)[:, ::-1, :]

    h = np.zeros((B, H), dtype=dtype)
    c = np.zeros((B, H), dtype=dtype)
    zcats = np.empty((B, T, S + H), dtype=dtype)
    gates = np.empty((B, T, 4 * H), dtype=dtype)  # sigma(i|f|o) then tanh(g)
    tcs = np.empty((B, T, H), dtype=dtype)
    c_prevs = np.empty((B, T, H), dtype=dtype)
    hs = np.empty((B, T, H), dtype=dtype)
    for t in range(T):
        zcat = zcats[:, t]
        zcat[:, :S] = dyn[:, t, :]
        zcat[:, S:] = h
        raw = zcat @ params.lstm_W + params.lstm_b
        act = gates[:, t]
        act[:, : 3 * H] = _sigmoid(raw[:, : 3 * H])
        act[:, 3 * H :] = np.tanh(raw[:, 3 * H :])
        i, f = act[:, :H], act[:, H : 2 * H]
        o, g = act[:, 2 * H : 3 * H], act[:, 3 * H :]
        c_prevs[:, t] = c
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        tcs[:, t], hs[:, t] = tc, h

    a = np.concatenate([hs.reshape(B, T * H), statics], axis=1)
    layer_in, acts = [], []
    for li, (W, b) in enumerate(zip(params.dense_W, params.dense_b)):
        layer_in.append(a)
        act = np.maximum(a @ W + b, 0.0)
        acts.append(act)
        a = act * masks[li] if masks is not None else act
    logits = a @ params.out_w + params.out_b[0]
    probs = _sigmoid(logits)
    cache = {
        "zcats": zcats,
        "gates": gates,
        "tc": tcs,
        "c_prev": c_prevs,
        "layer_in": layer_in,
        "act": acts,
        "last_a": a,
        "logits": logits,
        "masks": masks,
    }
    return probs, cache


def forward(
    params: ModelParams,
    x: np.ndarray,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Predicted probabilities for a batch (or a single example vector).

    With training=True and a nonzero dropout rate, `rng` supplies the
    dropout masks; inference (training=False) is a pure function.
    """
    x = np.asarray(x, dtype=params.lstm_W.dtype)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    masks = None
    rate = params.meta["dropout_rate"]
    if training and rate > 0.0:
        if rng is None:
            raise ValueError("training forward with dropout needs an rng")
        masks = _sample_masks(rng, _widths_of(params), x.shape[0], rate, x.dtype)
    probs, _ = _forward(params, x, masks)
    return probs[0] if single else probs


def _widths_of(params: ModelParams) -> list[int]:
    return [W.shape[1] for W in params.dense_W]


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------


def weighted_f1_loss(y, yhat, recall_weight: float = 4.5, eps: float = LOSS_EPS) -> float:
    """1 - F_beta with beta^2 = recall_weight, on probabilistic P and R."""
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    num = float((y * yhat).sum())
    P = num / (float(yhat.sum()) + eps)
    R = num / (float(y.sum()) + eps)
    a = 2.0 - 2.0 / (recall_weight + 1.0)
    b = 2.0 / (recall_weight + 1.0)
    return 1.0 - (2.0 * P * R) / (a * P + b * R + eps)


def _weighted_f1_dyhat(y, yhat, recall_weight: float, eps: float = LOSS_EPS) -> np.ndarray:
    num = (y * yhat).sum()
    s_hat = yhat.sum() + eps
    s_y = y.sum() + eps
    P, R = num / s_hat, num / s_y
    a = 2.0 - 2.0 / (recall_weight + 1.0)
    b = 2.0 / (recall_weight + 1.0)
    D = a * P + b * R + eps
    dF_dP = 2.0 * R * (b * R + eps) / (D * D)
    dF_dR = 2.0 * P * (a * P + eps) / (D * D)
    dP = (y - P) / s_hat
    dR = y / s_y
    return -(dF_dP * dP + dF_dR * dR)


def bce_loss(y, yhat, pos_weight: float = 1.0, eps: float = 1e-12) -> float:
    """Mean (optionally positive-class-weighted) binary cross-entropy."""
    y = np.asarray(y, dtype=float)
    yhat = np.clip(np.asarray(yhat, dtype=float), eps, 1.0 - eps)
    terms = pos_weight * y * np.log(yhat) + (1.0 - y) * np.log(1.0 - yhat)
    return float(-terms.mean())


def class_weighted_bce_loss(y, yhat, train_positive_fraction: float) -> float:
    """BCE with positive weight (1 - p) / p, p = train positive fraction."""
    p = train_positive_fraction
    return bce_loss(y, yhat, pos_weight=(1.0 - p) / p)


def _loss_and_dlogit(loss: str, y, probs, logits, cfg: ModelConfig, pos_weight: float):
    n = y.shape[0]
    yf = y.astype(probs.dtype)
    if loss == "weighted_f1":
        value = weighted_f1_loss(yf, probs, cfg.recall_weight)
        dyhat = _weighted_f1_dyhat(
            yf.astype(np.float64), probs.astype(np.float64), cfg.recall_weight
        )
        dlogit = (dyhat * (probs * (1.0 - probs)).astype(np.float64)).astype(probs.dtype)
        return value, dlogit
    # stable BCE through the logits
    z = logits.astype(np.float64)
    yd = yf.astype(np.float64)
    softplus = np.logaddexp(0.0, z)
    per = pos_weight * yd * (softplus - z) + (1.0 - yd) * softplus
    value = float(per.mean())
    ps = _sigmoid(z)
    dlogit = ((pos_weight * yd * (ps - 1.0) + (1.0 - yd) * ps) / n).astype(probs.dtype)
    return value, dlogit


def l2_penalty(params: ModelParams, gamma: float) -> float:
    return gamma * float(sum((W.astype(np.float64) ** 2).sum() for W in params.dense_W))


def training_objective(
    params: ModelParams, X, y, cfg: ModelConfig, pos_weight: float = 1.0
) -> float:
    """Data loss plus the L2 penalty — the quantity the gradient differentiates."""
    probs, cache = _forward(params, np.asarray(X, dtype=params.lstm_W.dtype), None)
    value, _ = _loss_and_dlogit(cfg.loss, np.asarray(y), probs, cache["logits"], cfg,
                                pos_weight)
    return value + l2_penalty(params, cfg.l2_gamma)


# ---------------------------------------------------------------------------
# Backward
# ---------------------------------------------------------------------------


def _check_finite(name: str, arr: np.ndarray):
    if not np.isfinite(arr).all():
        raise FloatingPointError(f"non-finite gradient in {name}")


def _backward(params: ModelParams, cache: dict, dlogit: np.ndarray, gamma: float) -> ModelParams:
    meta = params.meta
    H, T = meta["lstm_units"], meta["sequence_length"]
    B = dlogit.shape[0]
    dtype = params.lstm_W.dtype
    dlogit = dlogit.astype(dtype)

    g_out_w = cache["last_a"].T @ dlogit
    g_out_b = np.array([dlogit.sum()], dtype=dtype)
    da = np.outer(dlogit, params.out_w)

    masks = cache["masks"]
    g_dW = [None] * len(params.dense_W)
    g_db = [None] * len(params.dense_W)
    for li in range(len(params.dense_W) - 1, -1, -1):
        if masks is not None:
            da = da * masks[li]
        dz = da * (cache["act"][li] > 0)
        g_dW[li] = cache["layer_in"][li].T @ dz + 2.0 * gamma * params.dense_W[li]
        g_db[li] = dz.sum(axis=0)
        da = dz @ params.dense_W[li].T

    dh_all = da[:, : T * H].reshape(B, T, H)
    # da[:, T*H:] is the gradient w.r.t. the static inputs; nothing upstream

    g_lstm_W = np.zeros_like(params.lstm_W)
    g_lstm_b = np.zeros_like(params.lstm_b)
    W_h = params.lstm_W[-H:, :]  # rows multiplying h_{t-1}
    dh_rec = np.zeros((B, H), dtype=dtype)
    dc_rec = np.zeros((B, H), dtype=dtype)
    gates, tc, c_prev = cache["gates"], cache["tc"], cache["c_prev"]
    dz = np.empty((B, 4 * H), dtype=dtype)
    for t in range(T - 1, -1, -1):
        act = gates[:, t]
        i, f = act[:, :H], act[:, H : 2 * H]
        o, g = act[:, 2 * H : 3 * H], act[:, 3 * H :]
        dh = dh_all[:, t] + dh_rec
        dc = dh * o * (1.0 - tc[:, t] ** 2) + dc_rec
        dz[:, :H] = dc * g * i * (1.0 - i)
        dz[:, H : 2 * H] = dc * c_prev[:, t] * f * (1.0 - f)
        dz[:, 2 * H : 3 * H] = dh * tc[:, t] * o * (1.0 - o)
        dz[:, 3 * H :] = dc * i * (1.0 - g**2)
        g_lstm_W += cache["zcats"][:, t].T @ dz
        g_lstm_b += dz.sum(axis=0)
        dh_rec = dz @ W_h.T
        dc_rec = dc * f

    grads = ModelParams(g_lstm_W, g_lstm_b, g_dW, g_db, g_out_w, g_out_b, dict(meta))
    for name, arr in zip(grads.names(), grads.as_list()):
        _check_finite(name, arr)
    return grads


def _loss_and_grad(
    params: ModelParams,
    X: np.ndarray,
    y: np.ndarray,
    cfg: ModelConfig,
    masks: list[np.ndarray] | None,
    pos_weight: float = 1.0,
) -> tuple[float, ModelParams]:
    probs, cache = _forward(params, X, masks)
    value, dlogit = _loss_and_dlogit(cfg.loss, y, probs, cache["logits"], cfg, pos_weight)
    grads = _backward(params, cache, dlogit, cfg.l2_gamma)
    return value + l2_penalty(params, cfg.l2_gamma), grads


def loss_gradient(
    params: ModelParams,
    batch: tuple[np.ndarray, np.ndarray],
    cfg: ModelConfig,
    rng: np.random.Generator | None = None,
    pos_weight: float = 1.0,
) -> ModelParams:
    """Analytic gradient of (data loss + gamma * sum ||W_dense||^2).

    Dropout masks are sampled from `rng` when given and cfg.dropout_rate > 0;
    without an rng the gradient is of the inference-mode network.
    """
    X, y = batch
    if len(y) == 0:
        raise ValueError("empty batch")
    X = np.asarray(X, dtype=params.lstm_W.dtype)
    y = np.asarray(y)
    masks = None
    if rng is not None and cfg.dropout_rate > 0.0:
        masks = _sample_masks(rng, _widths_of(params), X.shape[0], cfg.dropout_rate, X.dtype)
    _, grads = _loss_and_grad(params, X, y, cfg, masks, pos_weight)
    return grads


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def init(cls, params: ModelParams) -> "AdamState":
        return cls(
            m=[np.zeros_like(a) for a in params.as_list()],
            v=[np.zeros_like(a) for a in params.as_list()],
            t=0,
        )


def adam_step(
    params: ModelParams,
    grads: ModelParams,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> ModelParams:
    """One Adam update; mutates `state`, returns new params."""
    state.t += 1
    bc1 = 1.0 - beta1**state.t
    bc2 = 1.0 - beta2**state.t
    new = []
    for k, (p, g) in enumerate(zip(params.as_list(), grads.as_list())):
        state.m[k] = beta1 * state.m[k] + (1.0 - beta1) * g
        state.v[k] = beta2 * state.v[k] + (1.0 - beta2) * g * g
        mhat = state.m[k] / bc1
        vhat = state.v[k] / bc2
        new.append(p - lr * mhat / (np.sqrt(vhat) + eps))
    return ModelParams.from_list(new, params.meta)


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------


def _data_loss(loss: str, y, probs, logits, cfg: ModelConfig, pos_weight: float) -> float:
    value, _ = _loss_and_dlogit(loss, y, probs, logits, cfg, pos_weight)
    return value


def train(
    cfg: ModelConfig, train_set: Dataset, val_set: Dataset
) -> tuple[ModelParams, TrainReport]:
    """Minibatch training with early stopping on validation loss.

    Returns the weights of the best-validation epoch. Training loss entries
    include the L2 penalty (the minimized objective); validation entries are
    the data loss alone.
    """
    if len(train_set) == 0 or len(val_set) == 0:
        raise ValueError("train and validation sets must be nonempty")
    dtype = np.dtype(cfg.dtype)
    X_tr = train_set.X.astype(dtype)
    y_tr = train_set.y
    X_val = val_set.X.astype(dtype)
    y_val = val_set.y
    p = float(y_tr.mean())
    if p == 0.0:
        raise ValueError("train set has no positive examples; the loss is undefined")
    if p == 1.0:
        raise ValueError("train set has no negative examples")
    pos_weight = (1.0 - p) / p if cfg.loss == "weighted_bce" else 1.0

    params = init_params(cfg, train_set.schema, p).astype(dtype)
    state = AdamState.init(params)
    rng = np.random.default_rng(cfg.seed)
    n = X_tr.shape[0]

    train_losses: list[float] = []
    val_losses: list[float] = []
    best_val = np.inf
    best_epoch = 0
    best_params = params.copy()
    stopped = cfg.max_epochs
    for epoch in range(1, cfg.max_epochs + 1):
        perm = rng.permutation(n)
        batch_losses = []
        for lo in range(0, n, cfg.batch_size):
            idx = perm[lo : lo + cfg.batch_size]
            masks = None
            if cfg.dropout_rate > 0.0:
                masks = _sample_masks(rng, _widths_of(params), idx.size,
                                      cfg.dropout_rate, dtype)
            loss, grads = _loss_and_grad(params, X_tr[idx], y_tr[idx], cfg, masks,
                                         pos_weight)
            params = adam_step(params, grads, state, cfg.learning_rate)
            batch_losses.append(loss)
        train_losses.append(float(np.mean(batch_losses)))

        probs, cache = _forward(params, X_val, None)
        val_loss = _data_loss(cfg.loss, y_val, probs, cache["logits"], cfg, pos_weight)
        val_losses.append(val_loss)
        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_params = params.copy()
        if epoch - best_epoch >= cfg.patience:
            stopped = epoch
            break

    return best_params, TrainReport(train_losses, val_losses, best_epoch, stopped)


def predict(
    params: ModelParams, examples, threshold: float = 0.5
) -> tuple[np.ndarray, np.ndarray]:
    """(probabilities, labels); label = 1 iff probability >= threshold."""
    X = examples.X if isinstance(examples, Dataset) else np.asarray(examples)
    probs = forward(params, X, training=False)
    return probs, (probs >= threshold).astype(np.int64)


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def save_checkpoint(
    path: str | Path,
    params: ModelParams,
    cfg: ModelConfig,
    schema: FeatureSchema,
    scaler: StandardScaler | None = None,
    report: TrainReport | None = None,
) -> None:
    doc = {
        "format": "shelterrisk-checkpoint-v1",
        "config": cfg.to_dict(),
        "schema_hash": schema.hash(),
        "schema": schema.to_dict(),
        "scaler": scaler.to_dict() if scaler is not None else None,
        "params": params.to_dict(),
        "report": report.to_dict() if report is not None else None,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_checkpoint(
    path: str | Path, schema: FeatureSchema | None = None
) -> tuple[ModelParams, ModelConfig, FeatureSchema, StandardScaler | None, TrainReport | None]:
    """Load a checkpoint; refuses one whose schema hash mismatches `schema`."""
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "shelterrisk-checkpoint-v1":
        raise ValueError(f"{path}: not a shelterrisk checkpoint")
    ck_schema = FeatureSchema.from_dict(doc["schema"])
    if schema is not None and schema.hash() != doc["schema_hash"]:
        raise ValueError(
            f"{path}: checkpoint schema hash {doc['schema_hash'][:12]}... does not "
            "match the dataset schema; refusing to load"
        )
    cfg = ModelConfig.from_dict(doc["config"])
    params = ModelParams.from_dict(doc["params"], dtype=np.dtype(cfg.dtype))
    scaler = StandardScaler.from_dict(doc["scaler"]) if doc.get("scaler") else None
    report = TrainReport(**doc["report"]) if doc.get("report") else None
    return params, cfg, ck_schema, scaler, report
