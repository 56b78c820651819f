"""Raw client-record data model and CSV persistence.

A record set is two CSV files plus a small JSON sidecar:

    clients.csv  ClientID,BirthDate,WeightKG,MonthlyIncome,MonthlyExpense,
                 SpdatScore,<SVCF columns>,<MVCF columns>
    events.csv   ClientID,ServiceType,Start,End   (ISO-8601, minute resolution)
    meta.json    {"data_end": "YYYY-MM-DD"}

MVCF cells are "|"-separated value lists; an empty cell means the value is
absent (missing), which is distinct from any concrete value. All values are
treated as immutable after construction and are safe to share across threads.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from datetime import date, datetime
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping

import csv

from .schema import SERVICE_TYPES, FeatureSchema, default_schema

SPDAT_RANGE = (0, 12)

_CLIENT_FIXED_COLUMNS = (
    "ClientID",
    "BirthDate",
    "WeightKG",
    "MonthlyIncome",
    "MonthlyExpense",
    "SpdatScore",
)
_EVENT_COLUMNS = ("ClientID", "ServiceType", "Start", "End")


class DataFormatError(ValueError):
    """Raised for malformed or inconsistent raw-record input."""


def _fail(file: str, line: int, column: str, message: str):
    raise DataFormatError(f"{file}, line {line}, column {column}: {message}")


@dataclass(frozen=True)
class ClientAttributes:
    client_id: int
    birth_date: date
    weight_kg: float | None
    svcf_values: Mapping[str, str]
    mvcf_values: Mapping[str, frozenset[str]]
    monthly_income: float = 0.0
    monthly_expense: float = 0.0
    latest_spdat_score: int | None = None

    def __post_init__(self):
        if self.weight_kg is not None and self.weight_kg < 0:
            raise DataFormatError(f"client {self.client_id}: negative weight")
        if self.monthly_income < 0 or self.monthly_expense < 0:
            raise DataFormatError(f"client {self.client_id}: negative income/expense")
        s = self.latest_spdat_score
        if s is not None and not SPDAT_RANGE[0] <= s <= SPDAT_RANGE[1]:
            raise DataFormatError(
                f"client {self.client_id}: SPDAT score {s} outside {SPDAT_RANGE}"
            )


@dataclass(frozen=True, slots=True)
class ServiceEvent:
    client_id: int
    service_type: str
    start: datetime
    end: datetime

    def __post_init__(self):
        if self.service_type not in SERVICE_TYPES:
            raise DataFormatError(f"unknown service type {self.service_type!r}")
        if self.end < self.start:
            raise DataFormatError(
                f"client {self.client_id}: event ends before it starts "
                f"({self.end} < {self.start})"
            )

    @property
    def duration_minutes(self) -> float:
        return (self.end - self.start).total_seconds() / 60.0


@dataclass
class RecordSet:
    """All clients and events, plus the last observable date.

    Immutable by convention; construction validates referential integrity.
    """

    clients: tuple[ClientAttributes, ...]
    events: tuple[ServiceEvent, ...]
    data_end: date

    def __post_init__(self):
        self.clients = tuple(self.clients)
        self.events = tuple(self.events)
        ids = [c.client_id for c in self.clients]
        if len(set(ids)) != len(ids):
            raise DataFormatError("duplicate ClientID in record set")
        known = set(ids)
        for ev in self.events:
            if ev.client_id not in known:
                raise DataFormatError(f"event references unknown client {ev.client_id}")
            if ev.end.date() > self.data_end:
                raise DataFormatError(
                    f"client {ev.client_id}: event at {ev.end} is after data_end "
                    f"{self.data_end}"
                )

    @cached_property
    def clients_by_id(self) -> dict[int, ClientAttributes]:
        return {c.client_id: c for c in self.clients}

    @cached_property
    def events_by_client(self) -> dict[int, tuple[ServiceEvent, ...]]:
        buckets: dict[int, list[ServiceEvent]] = {c.client_id: [] for c in self.clients}
        for ev in self.events:
            buckets[ev.client_id].append(ev)
        return {cid: tuple(evs) for cid, evs in buckets.items()}

    @cached_property
    def first_event_date(self) -> date | None:
        if not self.events:
            return None
        return min(ev.start.date() for ev in self.events)


# ---------------------------------------------------------------------------
# CSV persistence
# ---------------------------------------------------------------------------


def _fmt_float(v: float) -> str:
    return repr(float(v))


def _parse_float(cell: str, file: str, line: int, column: str) -> float:
    try:
        return float(cell)
    except ValueError:
        _fail(file, line, column, f"not a number: {cell!r}")


def _timestamp(cell: str, file: str, line: int, column: str) -> datetime:
    try:
        return datetime.fromisoformat(cell)
    except ValueError:
        _fail(file, line, column, f"not an ISO-8601 timestamp: {cell!r}")


def save_records(rs: RecordSet, path: str | Path, schema: FeatureSchema | None = None) -> None:
    """Write clients.csv, events.csv, and meta.json under `path`."""
    schema = schema or default_schema()
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)

    svcf_names = [name for name, _ in schema.svcf]
    mvcf_names = [name for name, _ in schema.mvcf]
    with open(path / "clients.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(_CLIENT_FIXED_COLUMNS) + svcf_names + mvcf_names)
        for c in rs.clients:
            row = [
                str(c.client_id),
                c.birth_date.isoformat(),
                "" if c.weight_kg is None else _fmt_float(c.weight_kg),
                _fmt_float(c.monthly_income),
                _fmt_float(c.monthly_expense),
                "" if c.latest_spdat_score is None else str(c.latest_spdat_score),
            ]
            row += [c.svcf_values.get(n, "") for n in svcf_names]
            row += ["|".join(sorted(c.mvcf_values.get(n, ()))) for n in mvcf_names]
            w.writerow(row)

    with open(path / "events.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_EVENT_COLUMNS)
        for ev in rs.events:
            w.writerow(
                [
                    str(ev.client_id),
                    ev.service_type,
                    ev.start.strftime("%Y-%m-%dT%H:%M"),
                    ev.end.strftime("%Y-%m-%dT%H:%M"),
                ]
            )

    with open(path / "meta.json", "w") as fh:
        json.dump({"data_end": rs.data_end.isoformat()}, fh)
        fh.write("\n")


def load_records(path: str | Path, schema: FeatureSchema | None = None) -> RecordSet:
    """Read a record set saved by `save_records` (or hand-built in the same
    layout). Unknown columns are ignored with a warning; structural problems
    raise DataFormatError naming file, line, and column."""
    schema = schema or default_schema()
    path = Path(path)
    clients = _load_clients(path / "clients.csv", schema)
    events = _load_events(path / "events.csv")

    meta_path = path / "meta.json"
    if meta_path.exists():
        data_end = date.fromisoformat(json.loads(meta_path.read_text())["data_end"])
    elif events:
        data_end = max(ev.end.date() for ev in events)
    else:
        raise DataFormatError(f"{meta_path}: missing, and no events to infer data_end")
    return RecordSet(clients=clients, events=events, data_end=data_end)


def _header_index(header: list[str], expected: Iterable[str], file: str) -> dict[str, int]:
    idx = {}
    for col in expected:
        if col not in header:
            raise DataFormatError(f"{file}: missing required column {col!r}")
        idx[col] = header.index(col)
    return idx


def _load_clients(file: Path, schema: FeatureSchema) -> tuple[ClientAttributes, ...]:
    svcf_names = {name for name, _ in schema.svcf}
    mvcf_names = {name for name, _ in schema.mvcf}
    with open(file, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{file}: empty file") from None
        idx = _header_index(header, _CLIENT_FIXED_COLUMNS, str(file))
        cat_cols: list[tuple[str, int, bool]] = []  # (name, col index, is_mvcf)
        for j, col in enumerate(header):
            if col in _CLIENT_FIXED_COLUMNS:
                continue
            if col in svcf_names:
                cat_cols.append((col, j, False))
            elif col in mvcf_names:
                cat_cols.append((col, j, True))
            else:
                warnings.warn(f"{file}: ignoring unknown column {col!r}")

        clients = []
        for line, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataFormatError(
                    f"{file}, line {line}: expected {len(header)} cells, got {len(row)}"
                )
            fstr = str(file)
            try:
                cid = int(row[idx["ClientID"]])
            except ValueError:
                _fail(fstr, line, "ClientID", f"not an integer: {row[idx['ClientID']]!r}")
            try:
                birth = date.fromisoformat(row[idx["BirthDate"]])
            except ValueError:
                _fail(fstr, line, "BirthDate", f"not a date: {row[idx['BirthDate']]!r}")
            wcell = row[idx["WeightKG"]]
            weight = None if wcell == "" else _parse_float(wcell, fstr, line, "WeightKG")
            income_cell = row[idx["MonthlyIncome"]]
            income = 0.0 if income_cell == "" else _parse_float(income_cell, fstr, line, "MonthlyIncome")
            expense_cell = row[idx["MonthlyExpense"]]
            expense = 0.0 if expense_cell == "" else _parse_float(expense_cell, fstr, line, "MonthlyExpense")
            scell = row[idx["SpdatScore"]]
            if scell == "":
                spdat = None
            else:
                try:
                    spdat = int(scell)
                except ValueError:
                    _fail(fstr, line, "SpdatScore", f"not an integer: {scell!r}")
            svcf_values: dict[str, str] = {}
            mvcf_values: dict[str, frozenset[str]] = {}
            for name, j, is_mvcf in cat_cols:
                cell = row[j]
                if cell == "":
                    continue
                if is_mvcf:
                    mvcf_values[name] = frozenset(cell.split("|"))
                else:
                    svcf_values[name] = cell
            try:
                clients.append(
                    ClientAttributes(
                        client_id=cid,
                        birth_date=birth,
                        weight_kg=weight,
                        svcf_values=svcf_values,
                        mvcf_values=mvcf_values,
                        monthly_income=income,
                        monthly_expense=expense,
                        latest_spdat_score=spdat,
                    )
                )
            except DataFormatError as exc:
                raise DataFormatError(f"{file}, line {line}: {exc}") from None
    return tuple(clients)


def _load_events(file: Path) -> tuple[ServiceEvent, ...]:
    with open(file, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{file}: empty file") from None
        idx = _header_index(header, _EVENT_COLUMNS, str(file))
        for col in header:
            if col not in _EVENT_COLUMNS:
                warnings.warn(f"{file}: ignoring unknown column {col!r}")

        events = []
        fstr = str(file)
        for line, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataFormatError(
                    f"{file}, line {line}: expected {len(header)} cells, got {len(row)}"
                )
            try:
                cid = int(row[idx["ClientID"]])
            except ValueError:
                _fail(fstr, line, "ClientID", f"not an integer: {row[idx['ClientID']]!r}")
            stype = row[idx["ServiceType"]]
            if stype not in SERVICE_TYPES:
                _fail(fstr, line, "ServiceType", f"unknown service type {stype!r}")
            start = _timestamp(row[idx["Start"]], fstr, line, "Start")
            end = _timestamp(row[idx["End"]], fstr, line, "End")
            try:
                events.append(ServiceEvent(cid, stype, start, end))
            except DataFormatError as exc:
                raise DataFormatError(f"{file}, line {line}, column End: {exc}") from None
    return tuple(events)
