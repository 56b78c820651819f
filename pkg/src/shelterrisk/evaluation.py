"""Metrics, nested rolling-origin cross-validation, and baselines.

AUC is computed rank-based (Mann-Whitney with midranks for ties) and is
exactly the pairwise comparison probability. Ratios with empty denominators
(no actual positives, no predicted positives, single-class AUC) are reported
as None — "undefined" is a distinct state, not 0.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import net
from .net import ModelConfig
from .pipeline import Dataset, StandardScaler, apply_scaler, fit_scaler, partition

METRIC_NAMES = ("recall", "precision", "f1", "auc", "accuracy")


@dataclass(frozen=True)
class Metrics:
    recall: float | None
    precision: float | None
    f1: float | None
    auc: float | None
    accuracy: float
    confusion: tuple[int, int, int, int]  # (tp, fp, tn, fn)

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in METRIC_NAMES}
        d["tp"], d["fp"], d["tn"], d["fn"] = self.confusion
        return d


def _midranks(scores: np.ndarray) -> np.ndarray:
    order = np.argsort(scores, kind="mergesort")
    ss = scores[order]
    n = scores.size
    boundaries = np.nonzero(np.diff(ss))[0] + 1
    starts = np.concatenate([[0], boundaries])
    ends = np.concatenate([boundaries, [n]])
    ranks = np.empty(n, dtype=float)
    for a, b in zip(starts, ends):
        ranks[order[a:b]] = (a + 1 + b) / 2.0
    return ranks


def auc_score(y: Sequence[int], scores: Sequence[float]) -> float | None:
    """Mann-Whitney AUC with midrank tie handling; None if single-class."""
    y = np.asarray(y)
    scores = np.asarray(scores, dtype=float)
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = _midranks(scores)
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def compute_metrics(y, probs, threshold: float = 0.5) -> Metrics:
    y = np.asarray(y)
    probs = np.asarray(probs, dtype=float)
    if y.size == 0 or y.size != probs.size:
        raise ValueError("y and probabilities must be nonempty and equal-length")
    pred = probs >= threshold
    tp = int((pred & (y == 1)).sum())
    fp = int((pred & (y == 0)).sum())
    tn = int((~pred & (y == 0)).sum())
    fn = int((~pred & (y == 1)).sum())
    recall = tp / (tp + fn) if tp + fn > 0 else None
    precision = tp / (tp + fp) if tp + fp > 0 else None
    if recall is None or precision is None or recall + precision == 0.0:
        f1 = None
    else:
        f1 = 2.0 * precision * recall / (precision + recall)
    return Metrics(
        recall=recall,
        precision=precision,
        f1=f1,
        auc=auc_score(y, probs),
        accuracy=(tp + tn) / y.size,
        confusion=(tp, fp, tn, fn),
    )


# ---------------------------------------------------------------------------
# Nested rolling-origin cross-validation
# ---------------------------------------------------------------------------


@dataclass
class FoldResult:
    fold: int
    metrics: Metrics
    model: object
    scaler: StandardScaler
    report: object | None
    val_date: object
    test_date: object


@dataclass
class CVReport:
    folds: list[FoldResult]

    def values(self, name: str) -> list[float]:
        return [getattr(f.metrics, name) for f in self.folds
                if getattr(f.metrics, name) is not None]

    def mean(self, name: str) -> float | None:
        vals = self.values(name)
        return float(np.mean(vals)) if vals else None

    def std(self, name: str) -> float | None:
        vals = self.values(name)
        if not vals:
            return None
        return float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0

    def summary(self) -> dict[str, tuple[float | None, float | None]]:
        return {m: (self.mean(m), self.std(m)) for m in METRIC_NAMES}


Trainer = Callable[[ModelConfig, Dataset, Dataset], tuple[object, Callable, object]]


def net_trainer(cfg: ModelConfig, train_ds: Dataset, val_ds: Dataset):
    params, report = net.train(cfg, train_ds, val_ds)
    return params, (lambda X: net.forward(params, X, training=False)), report


def logreg_trainer(cfg: ModelConfig, train_ds: Dataset, val_ds: Dataset):
    model = train_logreg(train_ds, class_weighting=True)
    return model, model.predict_proba, None


def nested_cv(
    ds: Dataset, cfg: ModelConfig, folds: int, trainer: Trainer = net_trainer
) -> CVReport:
    """Fold k drops the k-1 most recent steps; scaler refit on each train."""
    if folds < 1:
        raise ValueError("folds must be >= 1")
    results = []
    for k in range(1, folds + 1):
        try:
            train_raw, val_raw, test_raw = partition(ds, k)
            scaler = fit_scaler(train_raw)
            train_s = apply_scaler(scaler, train_raw)
            val_s = apply_scaler(scaler, val_raw)
            test_s = apply_scaler(scaler, test_raw)
            model, predict_proba, report = trainer(cfg, train_s, val_s)
            probs = predict_proba(test_s.X)
            metrics = compute_metrics(test_s.y, probs, cfg.threshold)
        except Exception as exc:
            raise RuntimeError(f"fold {k}: {exc}") from exc
        results.append(
            FoldResult(
                fold=k,
                metrics=metrics,
                model=model,
                scaler=scaler,
                report=report,
                val_date=val_raw.distinct_dates[0],
                test_date=test_raw.distinct_dates[0],
            )
        )
    return CVReport(results)


# ---------------------------------------------------------------------------
# Logistic-regression baseline
# ---------------------------------------------------------------------------


@dataclass
class LogisticModel:
    weights: np.ndarray
    bias: float
    converged: bool
    final_grad_norm: float

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        z = np.asarray(X, dtype=float) @ self.weights + self.bias
        return net._sigmoid(z)

    def predict(self, X: np.ndarray, threshold: float = 0.5) -> np.ndarray:
        return (self.predict_proba(X) >= threshold).astype(np.int64)


def _logreg_objective(Xb, y, c, wb):
    z = Xb @ wb
    softplus = np.logaddexp(0.0, z)
    per = c * (y * (softplus - z) + (1.0 - y) * softplus)
    return float(per.sum() / c.sum())


def train_logreg(
    train_set: Dataset,
    class_weighting: bool = False,
    max_iter: int = 300,
    tol: float = 1e-6,
) -> LogisticModel:
    """Full-batch gradient descent with backtracking line search, zero init.

    The example vector is used flattened as-is (statics, categorical bits,
    and all six dynamic steps). With class_weighting, positives carry weight
    (1 - p) / p where p is the train positive fraction.
    """
    X = np.asarray(train_set.X, dtype=float)
    y = train_set.y.astype(float)
    if X.shape[0] == 0:
        raise ValueError("empty training set")
    p = y.mean()
    if class_weighting:
        if p in (0.0, 1.0):
            raise ValueError("class weighting needs both classes present")
        c = np.where(y == 1.0, (1.0 - p) / p, 1.0)
    else:
        c = np.ones_like(y)

    Xb = np.concatenate([X, np.ones((X.shape[0], 1))], axis=1)
    wb = np.zeros(Xb.shape[1])
    csum = c.sum()
    f = _logreg_objective(Xb, y, c, wb)
    grad_norm = np.inf
    for _ in range(max_iter):
        probs = net._sigmoid(Xb @ wb)
        grad = Xb.T @ (c * (probs - y)) / csum
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm <= tol:
            break
        step = 1.0
        g2 = grad_norm**2
        for _ in range(60):
            cand = wb - step * grad
            fc = _logreg_objective(Xb, y, c, cand)
            if fc <= f - 0.5 * step * g2:
                break
            step *= 0.5
        wb = wb - step * grad
        f = _logreg_objective(Xb, y, c, wb)
    converged = grad_norm <= tol
    if not converged:
        warnings.warn(
            f"logistic regression did not converge: |grad| = {grad_norm:.3e} "
            f"after {max_iter} iterations"
        )
    return LogisticModel(weights=wb[:-1].copy(), bias=float(wb[-1]),
                         converged=converged, final_grad_norm=grad_norm)


# ---------------------------------------------------------------------------
# Model comparison (Table 2/3 methodology at desk scale)
# ---------------------------------------------------------------------------

COMPARISON_MODELS = (
    "rnn_mlp_weighted_f1",
    "rnn_mlp_weighted_bce",
    "rnn_mlp_bce",
    "logreg_class_weighted",
)


def config_for_loss(cfg: ModelConfig, loss: str) -> ModelConfig:
    """Per-loss training config used by the comparison table.

    The default L2 strength was tuned jointly with the weighted losses, whose
    positive-class gradients are several times larger than plain BCE's on data
    this imbalanced.  Carried over verbatim, the penalty out-pulls plain BCE's
    data gradient under Adam and the dense stack collapses to the
    constant-at-base-rate solution (zero recall, undefined precision), which
    would make the loss comparison vacuous.  Dropout and early stopping still
    regularize the plain-BCE variant.
    """
    if loss == "bce":
        return replace(cfg, loss="bce", l2_gamma=0.0)
    return replace(cfg, loss=loss)


def compare_models(ds: Dataset, cfg: ModelConfig, folds: int) -> dict[str, CVReport]:
    """Nested CV for the three net losses plus the logreg baseline,
    all on identical fold partitions."""
    out: dict[str, CVReport] = {}
    out["rnn_mlp_weighted_f1"] = nested_cv(ds, config_for_loss(cfg, "weighted_f1"), folds)
    out["rnn_mlp_weighted_bce"] = nested_cv(ds, config_for_loss(cfg, "weighted_bce"), folds)
    out["rnn_mlp_bce"] = nested_cv(ds, config_for_loss(cfg, "bce"), folds)
    out["logreg_class_weighted"] = nested_cv(ds, cfg, folds, trainer=logreg_trainer)
    return out


def _fmt_cell(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def write_cv_report(results: "dict[str, CVReport] | CVReport", path: str | Path) -> None:
    """cv_report.csv: one row per (model, fold), then mean/std summary rows."""
    if isinstance(results, CVReport):
        results = {"model": results}
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["model", "fold"] + list(METRIC_NAMES) + ["tp", "fp", "tn", "fn"])
        for name, report in results.items():
            for fr in report.folds:
                d = fr.metrics.as_dict()
                w.writerow(
                    [name, str(fr.fold)]
                    + [_fmt_cell(d[m]) for m in METRIC_NAMES]
                    + [str(d[k]) for k in ("tp", "fp", "tn", "fn")]
                )
            for stat, fn in (("mean", report.mean), ("std", report.std)):
                w.writerow(
                    [name, stat] + [_fmt_cell(fn(m)) for m in METRIC_NAMES] + [""] * 4
                )


def format_comparison(results: dict[str, CVReport]) -> str:
    """Console table in the "mean [std]" percentage style."""
    header = f"{'model':<24}" + "".join(f"{m:>16}" for m in METRIC_NAMES)
    lines = [header, "-" * len(header)]
    for name, report in results.items():
        cells = []
        for m in METRIC_NAMES:
            mean, std = report.mean(m), report.std(m)
            if mean is None:
                cells.append(f"{'undefined':>16}")
            else:
                cells.append(f"{100 * mean:>9.1f} [{100 * std:4.1f}]")
        lines.append(f"{name:<24}" + "".join(cells))
    return "\n".join(lines)
