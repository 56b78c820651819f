"""Local surrogate explanations (LIME) and a submodular-pick global summary.

The interpretable representation of an example is a binary vector with one
entry per *interpretable feature*: every numeric column (static and dynamic
counts alike) discretized into quartile bins, one entry per single-valued
categorical group, and one entry per multi-valued categorical bit. A
perturbed sample's entry is 1 when it falls in the same bin / takes the same
value as the instance being explained.

A weighted ridge regression fit to the black box's outputs on the perturbed
neighbourhood provides the explanation weights; the neighbourhood is weighted
by an exponential kernel on the number of mismatched interpretable features.
The submodular pick greedily selects a budget of explanations maximizing
importance-weighted feature coverage and aggregates their signed weights.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field, replace
from datetime import date as date_type
from typing import Callable, Sequence

import numpy as np

from .pipeline import Dataset, Example
from .schema import FeatureSchema

PredictFn = Callable[[np.ndarray], np.ndarray]

N_BINS = 4


@dataclass(frozen=True)
class LimeConfig:
    n_samples: int = 2000
    ridge_lambda: float = 1.0
    top_k: int = 10
    kernel_width: float | None = None  # default 0.75 * sqrt(n interpretable features)
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.ridge_lambda < 0:
            raise ValueError("ridge_lambda must be >= 0")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d: dict) -> "LimeConfig":
        return cls(**d)


@dataclass(frozen=True)
class _Feature:
    """One interpretable feature and how it maps onto the example vector."""

    kind: str  # "numeric" | "svcf" | "mvcf"
    name: str
    index: int = -1  # vector column (numeric, mvcf)
    group: slice | None = None  # one-hot slice (svcf)
    domain: tuple[str, ...] = ()


def _interpretable_features(schema: FeatureSchema) -> tuple[_Feature, ...]:
    cols = schema.column_names
    feats = [
        _Feature("numeric", cols[j], index=int(j)) for j in schema.numeric_indices
    ]
    for name, dom in schema.svcf:
        feats.append(_Feature("svcf", name, group=schema.svcf_slices[name], domain=dom))
    for name, dom in schema.mvcf:
        sl = schema.mvcf_slices[name]
        for k, v in enumerate(dom):
            feats.append(_Feature("mvcf", f"{name}={v}", index=sl.start + k))
    return tuple(feats)


@dataclass
class Discretizer:
    """Quartile bins plus the training statistics used to perturb around them.

    `cuts[j]` holds the 25/50/75 percentile cut points of numeric feature j
    (linear interpolation); values map to bin b via
    b = #{cuts < v}, i.e. v <= c0 -> 0 ... v > c2 -> 3. Constant training
    columns collapse to a single occupied bin and are flagged.
    """

    schema: FeatureSchema
    features: tuple[_Feature, ...]
    cuts: np.ndarray  # (n_numeric, 3)
    constant: np.ndarray  # (n_numeric,) bool
    bin_freq: np.ndarray  # (n_numeric, N_BINS) training occupancy
    bin_values: list  # per numeric feature: list of N_BINS arrays of raw values
    svcf_freq: list  # per svcf group: frequency over its domain
    mvcf_freq: np.ndarray  # per mvcf bit: P(bit == 1) in training

    @property
    def n_features(self) -> int:
        return len(self.features)

    @property
    def numeric_columns(self) -> np.ndarray:
        return self.schema.numeric_indices

    def bins_of(self, values: np.ndarray, j: int) -> np.ndarray:
        """Bin index for raw value(s) of the j-th numeric feature."""
        return np.searchsorted(self.cuts[j], values, side="left")

    def statement(self, feat_pos: int, instance: np.ndarray) -> str:
        """Human-readable claim the instance satisfies for one feature."""
        f = self.features[feat_pos]
        if f.kind == "numeric":
            j = _numeric_pos(self, f.index)
            if self.constant[j]:
                return f"{f.name} = {self.cuts[j][0]:.2f}"
            b = int(self.bins_of(instance[f.index], j))
            c = self.cuts[j]
            if b == 0:
                return f"{f.name} <= {c[0]:.2f}"
            if b == N_BINS - 1:
                return f"{f.name} > {c[2]:.2f}"
            return f"{c[b - 1]:.2f} < {f.name} <= {c[b]:.2f}"
        if f.kind == "svcf":
            value = f.domain[int(np.argmax(instance[f.group]))]
            return f"{f.name}={value}"
        return f"{f.name}" if instance[f.index] > 0.5 else f"NOT {f.name}"


def _numeric_pos(disc: Discretizer, column: int) -> int:
    # numeric features come first and in numeric_indices order
    return int(np.searchsorted(disc.numeric_columns, column))


def fit_discretizer(train_set: Dataset | np.ndarray, schema: FeatureSchema) -> Discretizer:
    """Quartile cut points and sampling statistics from raw training vectors."""
    X = train_set.X if isinstance(train_set, Dataset) else np.asarray(train_set, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("training set must be a nonempty 2-d array")
    if X.shape[1] != schema.vector_length:
        raise ValueError(
            f"training width {X.shape[1]} != schema vector length {schema.vector_length}"
        )

    feats = _interpretable_features(schema)
    num_cols = schema.numeric_indices
    cuts = np.empty((len(num_cols), 3))
    constant = np.zeros(len(num_cols), dtype=bool)
    bin_freq = np.zeros((len(num_cols), N_BINS))
    bin_values: list[list[np.ndarray]] = []
    for j, col in enumerate(num_cols):
        v = X[:, col]
        cuts[j] = np.percentile(v, [25.0, 50.0, 75.0])
        constant[j] = v.min() == v.max()
        b = np.searchsorted(cuts[j], v, side="left")
        counts = np.bincount(b, minlength=N_BINS).astype(float)
        bin_freq[j] = counts / counts.sum()
        bin_values.append([v[b == k] for k in range(N_BINS)])

    svcf_freq = [X[:, schema.svcf_slices[name]].mean(axis=0) for name, _ in schema.svcf]
    mvcf_cols = [f.index for f in feats if f.kind == "mvcf"]
    mvcf_freq = X[:, mvcf_cols].mean(axis=0) if mvcf_cols else np.empty(0)

    return Discretizer(schema, feats, cuts, constant, bin_freq, bin_values,
                       svcf_freq, mvcf_freq)


# ---------------------------------------------------------------------------
# Neighbourhood sampling
# ---------------------------------------------------------------------------


def kernel_weights(z: np.ndarray, width: float) -> np.ndarray:
    """exp(-d^2 / width^2), d = Euclidean distance from the all-ones vector."""
    d2 = z.shape[1] - z.sum(axis=1)
    return np.exp(-d2 / width**2)


def perturb(
    instance: np.ndarray,
    disc: Discretizer,
    n: int,
    rng: np.random.Generator,
    kernel_width: float | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sample an interpretable neighbourhood around one raw example vector.

    Returns (Z, X', pi): the binary interpretable matrix, reconstructed raw
    input vectors for the black box, and exponential-kernel weights. Row 0 is
    always the unperturbed instance itself (all-ones Z row, weight exactly 1).
    """
    if n < 1:
        raise ValueError("need at least one sample")
    instance = np.asarray(instance, dtype=float)
    m = disc.n_features
    Z = np.ones((n, m))
    Xp = np.tile(instance, (n, 1))

    pos = 0
    for j, col in enumerate(disc.numeric_columns):
        inst_bin = int(disc.bins_of(instance[col], j))
        drawn = rng.choice(N_BINS, size=n - 1, p=disc.bin_freq[j])
        Z[1:, pos] = drawn == inst_bin
        vals = np.empty(n - 1)
        for b in range(N_BINS):
            mask = drawn == b
            if mask.any():
                vals[mask] = rng.choice(disc.bin_values[j][b], size=int(mask.sum()))
        Xp[1:, col] = vals
        pos += 1

    for g, (name, dom) in enumerate(disc.schema.svcf):
        sl = disc.schema.svcf_slices[name]
        freq = np.asarray(disc.svcf_freq[g], dtype=float)
        freq = freq / freq.sum()
        inst_value = int(np.argmax(instance[sl]))
        drawn = rng.choice(len(dom), size=n - 1, p=freq)
        Z[1:, pos] = drawn == inst_value
        onehot = np.zeros((n - 1, len(dom)))
        onehot[np.arange(n - 1), drawn] = 1.0
        Xp[1:, sl] = onehot
        pos += 1

    for k, f in enumerate(x for x in disc.features if x.kind == "mvcf"):
        drawn = (rng.random(n - 1) < disc.mvcf_freq[k]).astype(float)
        Z[1:, pos] = drawn == instance[f.index]
        Xp[1:, f.index] = drawn
        pos += 1

    width = kernel_width if kernel_width is not None else 0.75 * np.sqrt(m)
    pi = kernel_weights(Z, width)
    return Z, Xp, pi


# ---------------------------------------------------------------------------
# Weighted ridge surrogate
# ---------------------------------------------------------------------------


def fit_ridge(
    Z: np.ndarray, targets: np.ndarray, pi: np.ndarray, lam: float
) -> tuple[np.ndarray, float, float]:
    """Closed-form weighted ridge fit; the intercept is not penalized.

    Minimizes sum_i pi_i (y_i - w.z_i - b)^2 + lam * ||w||^2 and returns
    (weights, intercept, weighted R^2).
    """
    Z = np.asarray(Z, dtype=float)
    y = np.asarray(targets, dtype=float)
    pi = np.asarray(pi, dtype=float)
    n, m = Z.shape
    if n < m:
        raise ValueError(f"need at least as many samples ({n}) as features ({m})")

    A = np.concatenate([Z, np.ones((n, 1))], axis=1)
    AW = A * pi[:, None]
    lhs = A.T @ AW
    lhs[np.arange(m), np.arange(m)] += lam
    rhs = AW.T @ y
    try:
        beta = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError as exc:
        raise ValueError(
            "singular ridge system; use ridge_lambda > 0 to regularize"
        ) from exc

    w, b = beta[:m], float(beta[m])
    resid = y - (Z @ w + b)
    ss_res = float((pi * resid**2).sum())
    ybar = float((pi * y).sum() / pi.sum())
    ss_tot = float((pi * (y - ybar) ** 2).sum())
    if ss_tot <= 1e-12:
        r2 = 1.0 if ss_res <= 1e-12 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return w, b, float(r2)


# ---------------------------------------------------------------------------
# Explanations
# ---------------------------------------------------------------------------


@dataclass
class Explanation:
    """A local surrogate explanation for one prediction."""

    client_id: str
    date: date_type | None
    entries: tuple[tuple[str, float], ...]  # sorted by descending |weight|
    intercept: float
    local_fidelity_r2: float
    predicted_probability: float
    feature_indices: tuple[int, ...]  # interpretable-feature index per entry
    n_samples: int
    seed: int
    runtime_seconds: float = 0.0

    def to_dict(self) -> dict:
        return {
            "client_id": self.client_id,
            "date": self.date.isoformat() if self.date else None,
            "entries": [[s, w] for s, w in self.entries],
            "intercept": self.intercept,
            "local_fidelity_r2": self.local_fidelity_r2,
            "predicted_probability": self.predicted_probability,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "runtime_seconds": self.runtime_seconds,
        }


def model_predictor(params, scaler=None) -> PredictFn:
    """Black-box callable over *raw* example vectors for a trained model."""
    from . import net

    def predict_fn(X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if scaler is not None:
            X = scaler.transform(X)
        return np.asarray(net.forward(params, X), dtype=float)

    return predict_fn


def explain_instance(
    predict_fn: PredictFn,
    instance: np.ndarray,
    disc: Discretizer,
    cfg: LimeConfig = LimeConfig(),
    *,
    client_id: str = "",
    date: date_type | None = None,
) -> Explanation:
    """Explain one prediction with a kernel-weighted ridge surrogate.

    A preliminary ridge fit over all interpretable features ranks them by
    |weight|; the final surrogate is refit on the top `cfg.top_k` and its
    weighted R^2 on the neighbourhood is reported as local fidelity.
    """
    t0 = time.perf_counter()
    instance = np.asarray(instance, dtype=float)
    rng = np.random.default_rng(cfg.seed)
    Z, Xp, pi = perturb(instance, disc, cfg.n_samples, rng, cfg.kernel_width)
    targets = np.asarray(predict_fn(Xp), dtype=float)

    w_all, _, _ = fit_ridge(Z, targets, pi, cfg.ridge_lambda)
    order = np.argsort(-np.abs(w_all), kind="stable")
    kept = np.sort(order[: cfg.top_k])
    w, b, r2 = fit_ridge(Z[:, kept], targets, pi, cfg.ridge_lambda)

    rank = np.argsort(-np.abs(w), kind="stable")
    entries = tuple(
        (disc.statement(int(kept[r]), instance), float(w[r])) for r in rank
    )
    return Explanation(
        client_id=client_id,
        date=date,
        entries=entries,
        intercept=b,
        local_fidelity_r2=r2,
        predicted_probability=float(targets[0]),
        feature_indices=tuple(int(kept[r]) for r in rank),
        n_samples=cfg.n_samples,
        seed=cfg.seed,
        runtime_seconds=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# Submodular pick
# ---------------------------------------------------------------------------


@dataclass
class GlobalExplanation:
    """Aggregated signed weights over a greedily picked explanation set."""

    entries: tuple[tuple[str, float], ...]  # sorted by descending |weight|
    picked_instance_ids: tuple[str, ...]
    coverage: float
    total_importance: float
    explanations: tuple[Explanation, ...] = field(default=(), repr=False)

    def to_dict(self) -> dict:
        return {
            "entries": [[s, w] for s, w in self.entries],
            "picked_instance_ids": list(self.picked_instance_ids),
            "coverage": self.coverage,
            "total_importance": self.total_importance,
        }


def coverage(nonzero: np.ndarray, importance: np.ndarray, picked: Sequence[int]) -> float:
    """c(V) = sum_j I_j * 1[some picked explanation uses feature j]."""
    if len(picked) == 0:
        return 0.0
    covered = nonzero[np.asarray(picked, dtype=int)].any(axis=0)
    return float(importance[covered].sum())


def greedy_pick(nonzero: np.ndarray, importance: np.ndarray, budget: int) -> list[int]:
    """Greedy maximization of `coverage`; ties go to the lowest index."""
    n = nonzero.shape[0]
    picked: list[int] = []
    covered = np.zeros(nonzero.shape[1], dtype=bool)
    for _ in range(min(budget, n)):
        gains = np.where(nonzero & ~covered, importance, 0.0).sum(axis=1)
        gains[picked] = -1.0
        best = int(np.argmax(gains))
        picked.append(best)
        covered |= nonzero[best]
    return picked


def submodular_pick(
    predict_fn: PredictFn,
    pool: "Dataset | Sequence[Example] | np.ndarray",
    budget: int,
    disc: Discretizer,
    cfg: LimeConfig = LimeConfig(),
) -> GlobalExplanation:
    """Global model summary from a budgeted greedy pick of explanations.

    Every pooled instance is explained with its own deterministic seed
    (cfg.seed + position), so results are independent of evaluation order.
    """
    if isinstance(pool, Dataset):
        examples: Sequence = pool.examples
    else:
        examples = list(pool)
    if len(examples) == 0:
        raise ValueError("explanation pool is empty")
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if budget > len(examples):
        warnings.warn(
            f"budget {budget} exceeds pool size {len(examples)}; picking all"
        )
        budget = len(examples)

    explanations = []
    for i, ex in enumerate(examples):
        if isinstance(ex, Example):
            vec, cid, dt = ex.x, ex.client_id, ex.date
        else:
            vec, cid, dt = np.asarray(ex, dtype=float), f"instance-{i}", None
        explanations.append(
            explain_instance(
                predict_fn, vec, disc, replace(cfg, seed=cfg.seed + i),
                client_id=str(cid), date=dt,
            )
        )

    W = np.zeros((len(explanations), disc.n_features))
    for i, e in enumerate(explanations):
        for pos, (_, weight) in zip(e.feature_indices, e.entries):
            W[i, pos] = weight
    importance = np.sqrt(np.abs(W).sum(axis=0))
    nonzero = np.abs(W) > 0

    picked = greedy_pick(nonzero, importance, budget)
    agg: dict[str, float] = {}
    for i in picked:
        for stmt, weight in explanations[i].entries:
            agg[stmt] = agg.get(stmt, 0.0) + weight
    entries = tuple(sorted(agg.items(), key=lambda kv: -abs(kv[1])))

    def _id(e: Explanation) -> str:
        return f"{e.client_id}@{e.date.isoformat()}" if e.date else e.client_id

    return GlobalExplanation(
        entries=entries,
        picked_instance_ids=tuple(_id(explanations[i]) for i in picked),
        coverage=coverage(nonzero, importance, picked),
        total_importance=float(importance.sum()),
        explanations=tuple(explanations[i] for i in picked),
    )


def sample_pool(
    examples: Sequence[Example], fraction: float = 0.2, cap: int | None = 300,
    seed: int = 0,
) -> tuple[Example, ...]:
    """Uniform subsample of an example pool (a fraction, optionally capped).

    The paper-scale procedure explains 20% of train+validation; the cap keeps
    desk-scale runs tractable since each explanation costs a neighbourhood of
    model evaluations.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must be in (0, 1]")
    n = max(1, int(round(fraction * len(examples))))
    if cap is not None:
        n = min(n, cap)
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(examples), size=min(n, len(examples)), replace=False)
    return tuple(examples[int(i)] for i in np.sort(idx))
