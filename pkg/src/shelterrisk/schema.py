"""Feature schema: the ordered catalog of static/dynamic features and the
encoding of a client state into a fixed-layout numeric vector.

Vector layout (fixed, documented order):
    [ numeric statics | SVCF one-hot groups | MVCF bit groups | dynamic T x D, row-major, t=0 first ]

SVCF = single-valued categorical feature (one-hot, domain always includes
"Unknown"). MVCF = multi-valued categorical feature (independent bits, all
zero when absent).
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from typing import Iterable, Mapping

import numpy as np

# The ten dynamic service kinds, in canonical column order.
SERVICE_TYPES: tuple[str, ...] = (
    "Stay",
    "Case Management",
    "Housing",
    "Housing Subsidy",
    "Storage",
    "Reservations",
    "Turnaways",
    "Food Bank",
    "Goods and Services",
    "SPDAT",
)

# Services whose per-step count is "number of distinct days used" vs
# "number of individual records".
DAY_COUNT_SERVICES = frozenset(
    {"Stay", "Case Management", "Housing", "Housing Subsidy", "Storage"}
)
EVENT_COUNT_SERVICES = frozenset(SERVICE_TYPES) - DAY_COUNT_SERVICES

UNKNOWN = "Unknown"

# Numeric features whose missing value is encoded as -1 rather than 0.
MISSING_AS_MINUS_ONE = frozenset({"ClientWeightKG", "TotalScore"})


def impute(value, feature_kind: str):
    """Fill a missing raw value according to its feature kind.

    feature_kind is one of "numeric", "weight_or_spdat", "svcf", "mvcf".
    Non-missing values pass through unchanged.
    """
    if feature_kind == "numeric":
        return 0.0 if value is None else float(value)
    if feature_kind == "weight_or_spdat":
        return -1.0 if value is None else float(value)
    if feature_kind == "svcf":
        return UNKNOWN if value is None else value
    if feature_kind == "mvcf":
        return frozenset() if value is None else frozenset(value)
    raise ValueError(f"unknown feature kind: {feature_kind!r}")


def _numeric_kind(name: str) -> str:
    return "weight_or_spdat" if name in MISSING_AS_MINUS_ONE else "numeric"


@dataclass(eq=True)
class FeatureSchema:
    """Ordered feature catalog defining the example-vector layout.

    Treat instances as immutable; layout attributes are cached on first use.
    """

    numeric_static: tuple[str, ...]
    svcf: tuple[tuple[str, tuple[str, ...]], ...]
    mvcf: tuple[tuple[str, tuple[str, ...]], ...]
    dynamic_services: tuple[str, ...] = SERVICE_TYPES
    sequence_length: int = 6
    step_days: int = 30

    @classmethod
    def build(
        cls,
        numeric_static: Iterable[str],
        svcf: Mapping[str, Iterable[str]],
        mvcf: Mapping[str, Iterable[str]],
        dynamic_services: Iterable[str] = SERVICE_TYPES,
        sequence_length: int = 6,
        step_days: int = 30,
    ) -> "FeatureSchema":
        """Construct a schema, appending "Unknown" to every SVCF domain."""
        svcf_t = tuple(
            (name, tuple(dom) + ((UNKNOWN,) if UNKNOWN not in dom else ()))
            for name, dom in ((n, tuple(d)) for n, d in svcf.items())
        )
        mvcf_t = tuple((name, tuple(dom)) for name, dom in mvcf.items())
        return cls(
            numeric_static=tuple(numeric_static),
            svcf=svcf_t,
            mvcf=mvcf_t,
            dynamic_services=tuple(dynamic_services),
            sequence_length=int(sequence_length),
            step_days=int(step_days),
        )

    # -- layout ---------------------------------------------------------

    @cached_property
    def n_numeric_static(self) -> int:
        return len(self.numeric_static)

    @cached_property
    def svcf_slices(self) -> dict[str, slice]:
        out = {}
        pos = self.n_numeric_static
        for name, dom in self.svcf:
            out[name] = slice(pos, pos + len(dom))
            pos += len(dom)
        return out

    @cached_property
    def mvcf_slices(self) -> dict[str, slice]:
        pos = self.n_numeric_static + sum(len(d) for _, d in self.svcf)
        out = {}
        for name, dom in self.mvcf:
            out[name] = slice(pos, pos + len(dom))
            pos += len(dom)
        return out

    @cached_property
    def static_size(self) -> int:
        """Length of the static block (numerics + all categorical bits)."""
        return (
            self.n_numeric_static
            + sum(len(d) for _, d in self.svcf)
            + sum(len(d) for _, d in self.mvcf)
        )

    @cached_property
    def dynamic_start(self) -> int:
        return self.static_size

    @cached_property
    def n_services(self) -> int:
        return len(self.dynamic_services)

    @cached_property
    def vector_length(self) -> int:
        return self.static_size + self.sequence_length * self.n_services

    def dynamic_index(self, t: int, service: str) -> int:
        """Vector index of the count for `service` in the window t steps back."""
        if not 0 <= t < self.sequence_length:
            raise IndexError(f"time step {t} outside [0, {self.sequence_length})")
        return self.dynamic_start + t * self.n_services + self.dynamic_services.index(service)

    def dynamic_feature_name(self, t: int, service: str) -> str:
        base = f"{self.step_days}-Day_{service}"
        return base if t == 0 else f"(-{t}){base}"

    @cached_property
    def column_names(self) -> tuple[str, ...]:
        cols: list[str] = list(self.numeric_static)
        for name, dom in self.svcf:
            cols.extend(f"{name}={v}" for v in dom)
        for name, dom in self.mvcf:
            cols.extend(f"{name}={v}" for v in dom)
        for t in range(self.sequence_length):
            cols.extend(self.dynamic_feature_name(t, s) for s in self.dynamic_services)
        return tuple(cols)

    @cached_property
    def numeric_indices(self) -> np.ndarray:
        """Indices of all numeric columns (statics plus dynamic counts);
        these and only these are standardized and discretized."""
        static_idx = np.arange(self.n_numeric_static)
        dyn_idx = np.arange(self.dynamic_start, self.vector_length)
        return np.concatenate([static_idx, dyn_idx])

    @cached_property
    def svcf_domains(self) -> dict[str, tuple[str, ...]]:
        return dict(self.svcf)

    @cached_property
    def mvcf_domains(self) -> dict[str, tuple[str, ...]]:
        return dict(self.mvcf)

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "numeric_static": list(self.numeric_static),
            "svcf": {name: list(dom) for name, dom in self.svcf},
            "mvcf": {name: list(dom) for name, dom in self.mvcf},
            "dynamic_services": list(self.dynamic_services),
            "sequence_length": self.sequence_length,
            "step_days": self.step_days,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "FeatureSchema":
        return cls.build(
            numeric_static=d["numeric_static"],
            svcf=d["svcf"],
            mvcf=d["mvcf"],
            dynamic_services=d.get("dynamic_services", SERVICE_TYPES),
            sequence_length=d.get("sequence_length", 6),
            step_days=d.get("step_days", 30),
        )

    def hash(self) -> str:
        """Stable hash of the layout; checkpoints refuse mismatched data."""
        payload = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()


def default_schema() -> FeatureSchema:
    """The bundled default schema (full feature catalog)."""
    text = resources.files("shelterrisk").joinpath("default_schema.json").read_text()
    return FeatureSchema.from_dict(json.loads(text))


@dataclass
class ClientState:
    """Raw (pre-encoding) view of one client at one date."""

    numeric: Mapping[str, float]
    svcf_values: Mapping[str, str]
    mvcf_values: Mapping[str, frozenset[str]]
    dynamic: np.ndarray = field(default=None)  # (sequence_length, n_services)


def encode(state: ClientState, schema: FeatureSchema) -> np.ndarray:
    """Encode a client state into the fixed vector layout.

    Missing values are imputed; SVCF values outside the schema domain map to
    "Unknown" and unknown MVCF values are dropped, both with a warning.
    """
    x = np.zeros(schema.vector_length)
    for i, name in enumerate(schema.numeric_static):
        x[i] = impute(state.numeric.get(name), _numeric_kind(name))
    for name, dom in schema.svcf:
        value = impute(state.svcf_values.get(name), "svcf")
        if value not in dom:
            warnings.warn(f"SVCF {name}: value {value!r} not in domain, using {UNKNOWN}")
            value = UNKNOWN
        sl = schema.svcf_slices[name]
        x[sl.start + dom.index(value)] = 1.0
    for name, dom in schema.mvcf:
        values = impute(state.mvcf_values.get(name), "mvcf")
        sl = schema.mvcf_slices[name]
        for v in values:
            if v not in dom:
                warnings.warn(f"MVCF {name}: value {v!r} not in domain, ignored")
                continue
            x[sl.start + dom.index(v)] = 1.0
    if state.dynamic is not None:
        dyn = np.asarray(state.dynamic, dtype=float)
        expected = (schema.sequence_length, schema.n_services)
        if dyn.shape != expected:
            raise ValueError(f"dynamic block shape {dyn.shape} != {expected}")
        x[schema.dynamic_start :] = dyn.reshape(-1)
    return x


def decode_categoricals(
    x: np.ndarray, schema: FeatureSchema
) -> tuple[dict[str, str], dict[str, frozenset[str]]]:
    """Recover categorical assignments from an encoded vector.

    Inverse of `encode` on the categorical blocks; raises if an SVCF group
    is not a valid one-hot.
    """
    svcf_out: dict[str, str] = {}
    for name, dom in schema.svcf:
        bits = x[schema.svcf_slices[name]]
        hot = np.flatnonzero(bits == 1.0)
        if len(hot) != 1 or bits.sum() != 1.0:
            raise ValueError(f"SVCF group {name} is not one-hot: {bits}")
        svcf_out[name] = dom[hot[0]]
    mvcf_out: dict[str, frozenset[str]] = {}
    for name, dom in schema.mvcf:
        bits = x[schema.mvcf_slices[name]]
        mvcf_out[name] = frozenset(dom[i] for i in np.flatnonzero(bits == 1.0))
    return svcf_out, mvcf_out
