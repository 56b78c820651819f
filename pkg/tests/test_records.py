"""Raw record model and CSV round-trip tests."""

from datetime import date, datetime, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shelterrisk.records import (
    ClientAttributes,
    DataFormatError,
    RecordSet,
    ServiceEvent,
    load_records,
    save_records,
)
from shelterrisk.schema import SERVICE_TYPES, default_schema

D0 = date(2020, 6, 1)


def ev(cid, svc="Stay", day=D0, h=18, m=0, dur=60):
    start = datetime(day.year, day.month, day.day, h, m)
    return ServiceEvent(cid, svc, start, start + timedelta(minutes=dur))


def client(cid, **kw):
    kw.setdefault("birth_date", date(1980, 3, 15))
    kw.setdefault("weight_kg", 70.0)
    kw.setdefault("svcf_values", {"Gender": "Female"})
    kw.setdefault("mvcf_values", {"IncomeType": frozenset({"Pension"})})
    return ClientAttributes(client_id=cid, **kw)


class TestValidation:
    def test_event_end_before_start_rejected(self):
        t = datetime(2020, 6, 1, 12, 0)
        with pytest.raises(DataFormatError):
            ServiceEvent(1, "Stay", t, t - timedelta(minutes=1))

    def test_event_zero_duration_allowed(self):
        t = datetime(2020, 6, 1, 12, 0)
        assert ServiceEvent(1, "Stay", t, t).duration_minutes == 0.0

    def test_unknown_service_type_rejected(self):
        t = datetime(2020, 6, 1, 12, 0)
        with pytest.raises(DataFormatError, match="unknown service type"):
            ServiceEvent(1, "Haircut", t, t)

    def test_negative_weight_rejected(self):
        with pytest.raises(DataFormatError):
            client(1, weight_kg=-1.0)

    def test_negative_income_rejected(self):
        with pytest.raises(DataFormatError):
            client(1, monthly_income=-5.0)

    @pytest.mark.parametrize("score", [-1, 13])
    def test_spdat_out_of_range_rejected(self, score):
        with pytest.raises(DataFormatError):
            client(1, latest_spdat_score=score)

    def test_spdat_absent_is_distinct_from_zero(self):
        assert client(1, latest_spdat_score=None).latest_spdat_score is None
        assert client(2, latest_spdat_score=0).latest_spdat_score == 0

    def test_duplicate_client_id_rejected(self):
        with pytest.raises(DataFormatError, match="duplicate ClientID"):
            RecordSet(clients=(client(1), client(1)), events=(), data_end=D0)

    def test_event_for_unknown_client_rejected(self):
        with pytest.raises(DataFormatError, match="unknown client"):
            RecordSet(clients=(client(1),), events=(ev(2),), data_end=D0)

    def test_event_after_data_end_rejected(self):
        with pytest.raises(DataFormatError, match="after data_end"):
            RecordSet(clients=(client(1),), events=(ev(1),),
                      data_end=D0 - timedelta(days=1))

    def test_first_event_date(self):
        rs = RecordSet(
            clients=(client(1),),
            events=(ev(1, day=D0), ev(1, day=D0 - timedelta(days=9))),
            data_end=D0,
        )
        assert rs.first_event_date == D0 - timedelta(days=9)
        assert RecordSet((client(1),), (), D0).first_event_date is None


class TestRoundTrip:
    def test_empty_recordset_writes_header_only_csvs(self, tmp_path):
        rs = RecordSet(clients=(), events=(), data_end=D0)
        save_records(rs, tmp_path)
        assert len((tmp_path / "clients.csv").read_text().splitlines()) == 1
        assert len((tmp_path / "events.csv").read_text().splitlines()) == 1
        back = load_records(tmp_path)
        assert back.clients == () and back.events == ()
        assert back.data_end == D0

    def test_one_client_zero_events(self, tmp_path):
        rs = RecordSet(clients=(client(7),), events=(), data_end=D0)
        save_records(rs, tmp_path)
        back = load_records(tmp_path)
        assert len(back.clients) == 1 and back.events == ()
        assert back.clients[0] == client(7)

    def test_single_row_per_file(self, tmp_path):
        rs = RecordSet(clients=(client(1),), events=(ev(1),), data_end=D0)
        save_records(rs, tmp_path)
        assert len((tmp_path / "clients.csv").read_text().splitlines()) == 2
        assert len((tmp_path / "events.csv").read_text().splitlines()) == 2

    def test_round_trip_preserves_everything(self, tmp_path):
        c1 = client(1, weight_kg=None, latest_spdat_score=9,
                    monthly_income=1234.56, monthly_expense=0.0)
        c2 = client(2, svcf_values={}, mvcf_values={})
        evs = (ev(1, "Stay", dur=14), ev(1, "SPDAT", h=9),
               ev(2, "Housing Subsidy", day=D0 - timedelta(days=3)))
        rs = RecordSet(clients=(c1, c2), events=evs, data_end=D0)
        save_records(rs, tmp_path)
        back = load_records(tmp_path)
        assert back.clients == rs.clients
        assert back.events == rs.events
        assert back.data_end == rs.data_end

    def test_data_end_inferred_without_meta(self, tmp_path):
        rs = RecordSet(clients=(client(1),), events=(ev(1),),
                       data_end=D0 + timedelta(days=40))
        save_records(rs, tmp_path)
        (tmp_path / "meta.json").unlink()
        assert load_records(tmp_path).data_end == D0  # max event end, not saved value

    def test_no_events_and_no_meta_is_an_error(self, tmp_path):
        save_records(RecordSet((client(1),), (), D0), tmp_path)
        (tmp_path / "meta.json").unlink()
        with pytest.raises(DataFormatError, match="meta.json"):
            load_records(tmp_path)


# random record sets for the round-trip oracle ------------------------------

_schema = default_schema()


@st.composite
def record_sets(draw):
    n = draw(st.integers(0, 6))
    clients, events = [], []
    for cid in range(1, n + 1):
        svcf = {}
        for name, dom in _schema.svcf:
            if draw(st.booleans()):
                svcf[name] = draw(st.sampled_from([v for v in dom]))
        mvcf = {}
        for name, dom in _schema.mvcf:
            picked = draw(st.frozensets(st.sampled_from(dom), max_size=len(dom)))
            if picked:
                mvcf[name] = picked
        clients.append(ClientAttributes(
            client_id=cid,
            birth_date=date(1950, 1, 1) + timedelta(days=draw(st.integers(0, 20000))),
            weight_kg=draw(st.one_of(st.none(), st.floats(30, 200).map(lambda v: round(v, 1)))),
            svcf_values=svcf,
            mvcf_values=mvcf,
            monthly_income=round(draw(st.floats(0, 5000)), 2),
            monthly_expense=round(draw(st.floats(0, 5000)), 2),
            latest_spdat_score=draw(st.one_of(st.none(), st.integers(0, 12))),
        ))
        for _ in range(draw(st.integers(0, 4))):
            # at least one full day before data_end so a 12h event can't cross it
            day = D0 - timedelta(days=draw(st.integers(1, 400)))
            start = datetime(day.year, day.month, day.day,
                             draw(st.integers(0, 23)), draw(st.integers(0, 59)))
            events.append(ServiceEvent(
                cid, draw(st.sampled_from(SERVICE_TYPES)), start,
                start + timedelta(minutes=draw(st.integers(0, 720))),
            ))
    return RecordSet(clients=tuple(clients), events=tuple(events), data_end=D0)


@settings(max_examples=100, deadline=None)
@given(record_sets())
def test_save_load_identity(tmp_path_factory, rs):
    """load_records is a left inverse of save_records."""
    out = tmp_path_factory.mktemp("rt")
    save_records(rs, out)
    back = load_records(out)
    assert back.clients == rs.clients
    assert back.events == rs.events
    assert back.data_end == rs.data_end


class TestLoadErrors:
    """Malformed input names file, line, and column."""

    def _write(self, tmp_path, clients_rows=None, events_rows=None):
        save_records(RecordSet((client(1),), (ev(1),), D0), tmp_path)
        if clients_rows is not None:
            (tmp_path / "clients.csv").write_text("\n".join(clients_rows) + "\n")
        if events_rows is not None:
            (tmp_path / "events.csv").write_text("\n".join(events_rows) + "\n")

    def test_bad_number_names_location(self, tmp_path):
        save_records(RecordSet((client(1),), (), D0), tmp_path)
        text = (tmp_path / "clients.csv").read_text().splitlines()
        text[1] = text[1].replace("70.0", "not-a-number", 1)
        (tmp_path / "clients.csv").write_text("\n".join(text) + "\n")
        with pytest.raises(DataFormatError, match=r"clients.csv, line 2, column WeightKG"):
            load_records(tmp_path)

    def test_bad_timestamp_names_location(self, tmp_path):
        self._write(tmp_path, events_rows=[
            "ClientID,ServiceType,Start,End",
            "1,Stay,yesterday,2020-06-01T19:00",
        ])
        with pytest.raises(DataFormatError, match=r"events.csv, line 2, column Start"):
            load_records(tmp_path)

    def test_end_before_start_rejected(self, tmp_path):
        self._write(tmp_path, events_rows=[
            "ClientID,ServiceType,Start,End",
            "1,Stay,2020-06-01T19:00,2020-06-01T18:00",
        ])
        with pytest.raises(DataFormatError, match="ends before it starts"):
            load_records(tmp_path)

    def test_unknown_service_type(self, tmp_path):
        self._write(tmp_path, events_rows=[
            "ClientID,ServiceType,Start,End",
            "1,Haircut,2020-06-01T18:00,2020-06-01T19:00",
        ])
        with pytest.raises(DataFormatError, match="line 2.*unknown service type"):
            load_records(tmp_path)

    def test_event_for_unknown_client(self, tmp_path):
        self._write(tmp_path, events_rows=[
            "ClientID,ServiceType,Start,End",
            "99,Stay,2020-06-01T18:00,2020-06-01T19:00",
        ])
        with pytest.raises(DataFormatError, match="unknown client 99"):
            load_records(tmp_path)

    def test_unknown_column_warns_but_loads(self, tmp_path):
        save_records(RecordSet((client(1),), (), D0), tmp_path)
        lines = (tmp_path / "clients.csv").read_text().splitlines()
        lines[0] += ",EyeColour"
        lines[1] += ",green"
        (tmp_path / "clients.csv").write_text("\n".join(lines) + "\n")
        with pytest.warns(UserWarning, match="EyeColour"):
            back = load_records(tmp_path)
        assert back.clients[0] == client(1)

    def test_missing_required_column(self, tmp_path):
        self._write(tmp_path, events_rows=["ClientID,ServiceType,Start", "1,Stay,x"])
        with pytest.raises(DataFormatError, match="missing required column 'End'"):
            load_records(tmp_path)

    def test_empty_mvcf_cell_means_absent(self, tmp_path):
        save_records(RecordSet((client(1, mvcf_values={}),), (), D0), tmp_path)
        back = load_records(tmp_path)
        assert back.clients[0].mvcf_values == {}
