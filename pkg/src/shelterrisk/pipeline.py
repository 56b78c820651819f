"""Preprocessing: raw records -> labeled, encoded, standardized examples.

The chronic-homelessness ground truth at a date is "at least 180 distinct
stay-days within the trailing 365 days", where a stay-day is a calendar day
with at least one shelter Stay event of >= 15 minutes (multiple same-day
visits count once; an event is attributed to the day containing its start).
An example at date d is labeled positive iff the client is chronic at
d + 180 days, so dates within 180 days of data_end are unlabelable and
excluded.

Examples live on a global 30-day grid anchored at the earliest event in the
record set; grid dates are step *end* dates, and the window for step t is
the half-open day interval (date - 30(t+1), date - 30t].
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from datetime import date, timedelta
from functools import cached_property
from pathlib import Path
from typing import Iterable

import numpy as np

from .records import ClientAttributes, RecordSet, ServiceEvent
from .schema import (
    DAY_COUNT_SERVICES,
    ClientState,
    FeatureSchema,
    default_schema,
    encode,
)

MIN_STAY_MINUTES = 15
CHRONIC_STAY_THRESHOLD = 180
CHRONIC_WINDOW_DAYS = 365  # the paper's 365.25, rounded to whole days
LABEL_HORIZON_DAYS = 180  # "6 months" = 6 thirty-day steps


# ---------------------------------------------------------------------------
# Per-client event digests
# ---------------------------------------------------------------------------


def _service_day_arrays(events: Iterable[ServiceEvent]) -> dict[str, np.ndarray]:
    """Sorted day-ordinal arrays per service type.

    Day-count services are deduplicated to distinct days; event-count
    services keep one entry per event. Stay events shorter than 15 minutes
    are dropped entirely (they qualify neither as stays nor as usage).
    """
    buckets: dict[str, list[int]] = {}
    for ev in events:
        if ev.service_type == "Stay" and ev.duration_minutes < MIN_STAY_MINUTES:
            continue
        buckets.setdefault(ev.service_type, []).append(ev.start.date().toordinal())
    out = {}
    for svc, days in buckets.items():
        arr = np.asarray(days, dtype=np.int64)
        out[svc] = np.unique(arr) if svc in DAY_COUNT_SERVICES else np.sort(arr)
    return out


def _window_count(arr: np.ndarray, end_ord, days) -> np.ndarray:
    """Count of entries in the half-open interval (end - days, end]."""
    hi = np.searchsorted(arr, end_ord, side="right")
    lo = np.searchsorted(arr, np.asarray(end_ord) - days, side="right")
    return hi - lo


def _client_events(events: Iterable[ServiceEvent], client_id: int) -> list[ServiceEvent]:
    return [ev for ev in events if ev.client_id == client_id]


# ---------------------------------------------------------------------------
# Labeling
# ---------------------------------------------------------------------------


def count_stays(
    events: Iterable[ServiceEvent],
    client_id: int,
    window_end: date,
    window_days: int,
) -> int:
    """Distinct qualifying stay-days in (window_end - window_days, window_end]."""
    if window_days < 1:
        raise ValueError("window_days must be >= 1")
    arr = _service_day_arrays(_client_events(events, client_id)).get("Stay")
    if arr is None:
        return 0
    return int(_window_count(arr, window_end.toordinal(), window_days))


def is_chronic(
    events: Iterable[ServiceEvent],
    client_id: int,
    as_of: date,
    window_days: int = CHRONIC_WINDOW_DAYS,
    threshold: int = CHRONIC_STAY_THRESHOLD,
) -> bool:
    return count_stays(events, client_id, as_of, window_days) >= threshold


def label_example(
    events: Iterable[ServiceEvent],
    client_id: int,
    d: date,
    horizon_days: int = LABEL_HORIZON_DAYS,
    window_days: int = CHRONIC_WINDOW_DAYS,
) -> int:
    """y = 1 iff the client is chronic `horizon_days` after d."""
    return int(is_chronic(events, client_id, d + timedelta(days=horizon_days), window_days))


# ---------------------------------------------------------------------------
# Feature extraction
# ---------------------------------------------------------------------------


def _age_years(birth: date, on: date) -> int:
    years = on.year - birth.year
    if (on.month, on.day) < (birth.month, birth.day):
        years -= 1
    return years


def _score_visible(client: ClientAttributes, spdat_days: np.ndarray | None, end_ord: int) -> bool:
    # The raw model keeps only the latest score, dated by the client's last
    # SPDAT event; before that date the then-current score is unknowable.
    if client.latest_spdat_score is None:
        return False
    if spdat_days is None or spdat_days.size == 0:
        return True
    return int(spdat_days[-1]) <= end_ord


def dynamic_features(
    events: Iterable[ServiceEvent],
    client_id: int,
    d: date,
    schema: FeatureSchema,
) -> np.ndarray:
    """T_x x n_services usage counts; row t is the window ending at d - 30t."""
    arrays = _service_day_arrays(_client_events(events, client_id))
    out = np.zeros((schema.sequence_length, schema.n_services))
    end = d.toordinal()
    for s_i, svc in enumerate(schema.dynamic_services):
        arr = arrays.get(svc)
        if arr is None or arr.size == 0:
            continue
        for t in range(schema.sequence_length):
            out[t, s_i] = _window_count(arr, end - schema.step_days * t, schema.step_days)
    return out


def static_features(
    client: ClientAttributes,
    events: Iterable[ServiceEvent],
    d: date,
    schema: FeatureSchema,
) -> ClientState:
    """Numeric statics as of d plus the client's categorical assignments.

    Missing values stay None here; `encode` applies the imputation rules.
    """
    arrays = _service_day_arrays(_client_events(events, client.client_id))
    end = d.toordinal()
    numeric: dict[str, float | None] = {
        "CurrentAge": float(_age_years(client.birth_date, d)),
        "ClientWeightKG": client.weight_kg,
        "ExpenseAmount": client.monthly_expense,
    }
    if _score_visible(client, arrays.get("SPDAT"), end):
        numeric["TotalScore"] = float(client.latest_spdat_score)
    else:
        numeric["TotalScore"] = None
    for svc in schema.dynamic_services:
        arr = arrays.get(svc)
        n = 0 if arr is None else int(np.searchsorted(arr, end, side="right"))
        numeric[f"Total_{svc}"] = float(n)
    return ClientState(
        numeric=numeric,
        svcf_values=client.svcf_values,
        mvcf_values=client.mvcf_values,
        dynamic=None,
    )


# ---------------------------------------------------------------------------
# Examples and datasets
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Example:
    client_id: int
    date: date
    x: np.ndarray
    y: int


@dataclass(eq=False)
class Dataset:
    """Examples sorted by (date, client_id), with unique (client, date) keys."""

    schema: FeatureSchema
    examples: tuple[Example, ...]
    scaler: "StandardScaler | None" = None

    def __post_init__(self):
        ex = tuple(sorted(self.examples, key=lambda e: (e.date, e.client_id)))
        keys = {(e.client_id, e.date) for e in ex}
        if len(keys) != len(ex):
            raise ValueError("duplicate (client_id, date) in dataset")
        self.examples = ex

    def __len__(self) -> int:
        return len(self.examples)

    @cached_property
    def X(self) -> np.ndarray:
        if not self.examples:
            return np.zeros((0, self.schema.vector_length))
        return np.stack([e.x for e in self.examples])

    @cached_property
    def y(self) -> np.ndarray:
        return np.asarray([e.y for e in self.examples], dtype=np.int64)

    def to_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return self.X, self.y

    @cached_property
    def distinct_dates(self) -> tuple[date, ...]:
        return tuple(sorted({e.date for e in self.examples}))

    @property
    def positive_rate(self) -> float:
        return float(self.y.mean()) if self.examples else 0.0


@dataclass
class StandardScaler:
    """Per-column standardization over the numeric columns only.

    `stds` is the population standard deviation; columns flagged constant
    (sigma = 0 on the fitting data) pass through unchanged.
    """

    indices: np.ndarray
    means: np.ndarray
    stds: np.ndarray
    constant: np.ndarray

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.array(X, dtype=float)
        cols = X[..., self.indices]
        safe = np.where(self.constant, 1.0, self.stds)
        X[..., self.indices] = np.where(self.constant, cols, (cols - self.means) / safe)
        return X

    def to_dict(self) -> dict:
        return {
            "indices": self.indices.tolist(),
            "means": self.means.tolist(),
            "stds": self.stds.tolist(),
            "constant": self.constant.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StandardScaler":
        return cls(
            indices=np.asarray(d["indices"], dtype=np.int64),
            means=np.asarray(d["means"], dtype=float),
            stds=np.asarray(d["stds"], dtype=float),
            constant=np.asarray(d["constant"], dtype=bool),
        )


def fit_scaler(train: "Dataset | np.ndarray", schema: FeatureSchema | None = None) -> StandardScaler:
    """Fit means/stds on the training partition only (never val/test)."""
    if isinstance(train, Dataset):
        schema = schema or train.schema
        X = train.X
    else:
        if schema is None:
            raise ValueError("schema required when fitting from a raw matrix")
        X = np.asarray(train, dtype=float)
    if X.shape[0] == 0:
        raise ValueError("cannot fit a scaler on an empty training set")
    cols = X[:, schema.numeric_indices]
    means = cols.mean(axis=0)
    stds = cols.std(axis=0)  # population sigma
    return StandardScaler(
        indices=schema.numeric_indices.copy(),
        means=means,
        stds=stds,
        constant=stds == 0.0,
    )


def apply_scaler(scaler: StandardScaler, data: "Dataset | np.ndarray"):
    """Standardize a dataset (returns a new Dataset) or a raw matrix/vector."""
    if isinstance(data, Dataset):
        Xs = scaler.transform(data.X)
        ex = tuple(
            Example(e.client_id, e.date, Xs[i], e.y) for i, e in enumerate(data.examples)
        )
        return Dataset(data.schema, ex, scaler=scaler)
    return scaler.transform(np.asarray(data, dtype=float))


# ---------------------------------------------------------------------------
# Dataset construction and temporal partitioning
# ---------------------------------------------------------------------------


def grid_dates(rs: RecordSet, schema: FeatureSchema, horizon_days: int = LABEL_HORIZON_DAYS) -> tuple[date, ...]:
    """Step-end dates of the global grid, up to the last labelable date."""
    anchor = rs.first_event_date
    if anchor is None:
        return ()
    cutoff = (rs.data_end - timedelta(days=horizon_days)).toordinal()
    first_end = anchor.toordinal() + schema.step_days - 1
    if first_end > cutoff:
        return ()
    ords = np.arange(first_end, cutoff + 1, schema.step_days)
    return tuple(date.fromordinal(int(o)) for o in ords)


def build_dataset(
    rs: RecordSet,
    schema: FeatureSchema | None = None,
    horizon_days: int = LABEL_HORIZON_DAYS,
    window_days: int = CHRONIC_WINDOW_DAYS,
) -> Dataset:
    """One unscaled labeled example per (client, grid date with history)."""
    schema = schema or default_schema()
    grid = np.asarray([d.toordinal() for d in grid_dates(rs, schema, horizon_days)], dtype=np.int64)
    if grid.size == 0:
        return Dataset(schema, ())

    T, S = schema.sequence_length, schema.n_services
    step = schema.step_days
    num_index = {name: i for i, name in enumerate(schema.numeric_static)}
    i_age = num_index.get("CurrentAge")
    i_wt = num_index.get("ClientWeightKG")
    i_exp = num_index.get("ExpenseAmount")
    i_sc = num_index.get("TotalScore")
    tot_idx = [
        (num_index[f"Total_{svc}"], s_i)
        for s_i, svc in enumerate(schema.dynamic_services)
        if f"Total_{svc}" in num_index
    ]

    examples: list[Example] = []
    for client in rs.clients:
        evs = rs.events_by_client.get(client.client_id, ())
        if not evs:
            continue
        first_ord = min(ev.start.date().toordinal() for ev in evs)
        g = grid[grid >= first_ord]
        if g.size == 0:
            continue
        arrays = _service_day_arrays(evs)

        thr = g[:, None] - step * np.arange(T + 1)[None, :]
        dyn = np.zeros((g.size, T, S))
        totals = np.zeros((g.size, S))
        for s_i, svc in enumerate(schema.dynamic_services):
            arr = arrays.get(svc)
            if arr is None or arr.size == 0:
                continue
            R = np.searchsorted(arr, thr, side="right")
            dyn[:, :, s_i] = R[:, :T] - R[:, 1:]
            totals[:, s_i] = R[:, 0]

        stays = arrays.get("Stay")
        if stays is None or stays.size == 0:
            ys = np.zeros(g.size, dtype=np.int64)
        else:
            ys = (_window_count(stays, g + horizon_days, window_days) >= CHRONIC_STAY_THRESHOLD).astype(np.int64)

        spdat = arrays.get("SPDAT")
        template = encode(
            ClientState(
                numeric={},
                svcf_values=client.svcf_values,
                mvcf_values=client.mvcf_values,
                dynamic=None,
            ),
            schema,
        )
        for j, g_ord in enumerate(g):
            d = date.fromordinal(int(g_ord))
            x = template.copy()
            if i_age is not None:
                x[i_age] = _age_years(client.birth_date, d)
            if i_wt is not None and client.weight_kg is not None:
                x[i_wt] = client.weight_kg
            if i_exp is not None:
                x[i_exp] = client.monthly_expense
            if i_sc is not None and _score_visible(client, spdat, int(g_ord)):
                x[i_sc] = client.latest_spdat_score
            for vec_i, s_i in tot_idx:
                x[vec_i] = totals[j, s_i]
            x[schema.dynamic_start :] = dyn[j].reshape(-1)
            examples.append(Example(client.client_id, d, x, int(ys[j])))

    return Dataset(schema, tuple(examples))


def partition(ds: Dataset, k: int) -> tuple[Dataset, Dataset, Dataset]:
    """Rolling-origin split for fold k (1-based).

    Drops examples at the k-1 most recent grid dates, then test = the most
    recent remaining date, val = the second most recent, train = everything
    earlier. "Time steps" are the distinct example dates present.
    """
    if k < 1:
        raise ValueError("fold index k must be >= 1")
    dates = ds.distinct_dates
    if len(dates) < k + 2:
        raise ValueError(f"fold {k} needs >= {k + 2} time steps, dataset has {len(dates)}")
    kept = dates[: len(dates) - (k - 1)]
    test_date, val_date = kept[-1], kept[-2]
    train_dates = set(kept[:-2])
    train = tuple(e for e in ds.examples if e.date in train_dates)
    val = tuple(e for e in ds.examples if e.date == val_date)
    test = tuple(e for e in ds.examples if e.date == test_date)
    return (
        Dataset(ds.schema, train, scaler=ds.scaler),
        Dataset(ds.schema, val, scaler=ds.scaler),
        Dataset(ds.schema, test, scaler=ds.scaler),
    )


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def save_dataset(ds: Dataset, path: str | Path) -> None:
    """Write `<path>` as CSV plus a `.json` sidecar (schema + scaler)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["ClientID", "Date", "y"] + list(ds.schema.column_names))
        for e in ds.examples:
            w.writerow(
                [str(e.client_id), e.date.isoformat(), str(int(e.y))]
                + [repr(float(v)) for v in e.x]
            )
    sidecar = {
        "schema": ds.schema.to_dict(),
        "scaler": ds.scaler.to_dict() if ds.scaler is not None else None,
    }
    with open(path.with_suffix(".json"), "w") as fh:
        json.dump(sidecar, fh, indent=1)
        fh.write("\n")


def load_dataset(path: str | Path) -> Dataset:
    path = Path(path)
    sidecar_path = path.with_suffix(".json")
    if not sidecar_path.exists():
        raise FileNotFoundError(f"missing dataset sidecar {sidecar_path}")
    sidecar = json.loads(sidecar_path.read_text())
    schema = FeatureSchema.from_dict(sidecar["schema"])
    scaler = (
        StandardScaler.from_dict(sidecar["scaler"])
        if sidecar.get("scaler") is not None
        else None
    )
    examples = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        expected = ["ClientID", "Date", "y"] + list(schema.column_names)
        if header != expected:
            raise ValueError(f"{path}: header does not match schema sidecar")
        for row in reader:
            x = np.asarray([float(v) for v in row[3:]], dtype=float)
            examples.append(
                Example(int(row[0]), date.fromisoformat(row[1]), x, int(row[2]))
            )
    return Dataset(schema, tuple(examples), scaler=scaler)
