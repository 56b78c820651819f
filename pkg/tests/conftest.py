"""Shared fixtures: a small schema and cheap dataset builders.

The heavyweight acceptance fixtures (3000-client cohort, trained models)
live in test_acceptance.py so unit-test runs never pay for them.
"""

from datetime import date, timedelta

import numpy as np
import pytest

from shelterrisk.pipeline import Dataset, Example
from shelterrisk.schema import FeatureSchema


@pytest.fixture(scope="session")
def tiny_schema() -> FeatureSchema:
    # 2 numerics + (2+Unknown) svcf + 2 mvcf bits + 2x3 dynamic = 13 columns
    return FeatureSchema.build(
        numeric_static=("CurrentAge", "Total_Stay"),
        svcf={"Color": ("Red", "Blue")},
        mvcf={"Tag": ("A", "B")},
        dynamic_services=("Stay", "Food Bank", "SPDAT"),
        sequence_length=2,
        step_days=30,
    )


def make_dataset(
    X: np.ndarray,
    y: np.ndarray,
    schema: FeatureSchema,
    start: date = date(2020, 1, 1),
    per_date: int | None = None,
) -> Dataset:
    """Wrap raw arrays as a Dataset, spreading rows over consecutive dates.

    `per_date` rows share each date (default: all on one date); client ids
    are assigned sequentially within a date so keys stay unique.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    n = X.shape[0]
    per = n if per_date is None else per_date
    examples = tuple(
        Example(i % per + 1, start + timedelta(days=30 * (i // per)), X[i], int(y[i]))
        for i in range(n)
    )
    return Dataset(schema, examples)


def random_dataset(
    schema: FeatureSchema,
    n: int,
    rng: np.random.Generator,
    pos_rate: float = 0.3,
    per_date: int | None = None,
) -> Dataset:
    """Schema-valid random examples: unit-scale numerics, proper one-hots."""
    X = np.zeros((n, schema.vector_length))
    X[:, : schema.n_numeric_static] = rng.normal(size=(n, schema.n_numeric_static))
    for name, dom in schema.svcf:
        sl = schema.svcf_slices[name]
        pick = rng.integers(0, len(dom), size=n)
        X[np.arange(n), sl.start + pick] = 1.0
    for name, dom in schema.mvcf:
        sl = schema.mvcf_slices[name]
        X[:, sl] = rng.random((n, len(dom))) < 0.3
    dyn = rng.poisson(1.5, size=(n, schema.vector_length - schema.dynamic_start))
    X[:, schema.dynamic_start :] = dyn
    y = (rng.random(n) < pos_rate).astype(int)
    if y.sum() == 0:
        y[0] = 1
    if y.sum() == n:
        y[-1] = 0
    return make_dataset(X, y, schema, per_date=per_date)
