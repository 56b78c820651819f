"""Labeling, feature extraction, standardization, and temporal partitioning."""

import warnings
from datetime import date, datetime, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shelterrisk.pipeline import (
    CHRONIC_STAY_THRESHOLD,
    CHRONIC_WINDOW_DAYS,
    MIN_STAY_MINUTES,
    Dataset,
    Example,
    apply_scaler,
    build_dataset,
    count_stays,
    dynamic_features,
    fit_scaler,
    grid_dates,
    is_chronic,
    label_example,
    load_dataset,
    partition,
    save_dataset,
    static_features,
)
from shelterrisk.records import ClientAttributes, RecordSet, ServiceEvent
from shelterrisk.schema import ClientState, decode_categoricals, default_schema, encode, impute

D = date(2020, 6, 1)


def stay(cid, day, minutes=60, hour=18, minute=0):
    start = datetime(day.year, day.month, day.day, hour, minute)
    return ServiceEvent(cid, "Stay", start, start + timedelta(minutes=minutes))


def event(cid, svc, day, minutes=30):
    start = datetime(day.year, day.month, day.day, 10, 0)
    return ServiceEvent(cid, svc, start, start + timedelta(minutes=minutes))


def brute_count(events, cid, window_end, window_days):
    """Independent recount: distinct start-days of qualifying stays."""
    lo = window_end - timedelta(days=window_days)
    days = set()
    for ev in events:
        if ev.client_id != cid or ev.service_type != "Stay":
            continue
        if ev.duration_minutes < MIN_STAY_MINUTES:
            continue
        d = ev.start.date()
        if lo < d <= window_end:
            days.add(d)
    return len(days)


class TestCountStays:
    def test_multiple_same_day_visits_count_once(self):
        evs = [stay(1, D, 20, hour=h) for h in (8, 12, 20)]
        assert count_stays(evs, 1, D, 365) == 1

    def test_short_visit_does_not_count(self):
        assert count_stays([stay(1, D, 10)], 1, D, 365) == 0

    def test_fifteen_minute_boundary(self):
        assert count_stays([stay(1, D, 14)], 1, D, 365) == 0
        assert count_stays([stay(1, D, 15)], 1, D, 365) == 1

    def test_200_consecutive_days(self):
        evs = [stay(1, D - timedelta(days=i), 30) for i in range(200)]
        assert count_stays(evs, 1, D, 365) == 200

    def test_window_is_half_open(self):
        # (end - days, end]: the day exactly `window_days` back is excluded
        evs = [stay(1, D - timedelta(days=365)), stay(1, D)]
        assert count_stays(evs, 1, D, 365) == 1
        evs = [stay(1, D - timedelta(days=364))]
        assert count_stays(evs, 1, D, 365) == 1

    def test_midnight_spanning_stay_counts_on_start_day(self):
        ev = ServiceEvent(1, "Stay", datetime(2020, 6, 1, 23, 30),
                          datetime(2020, 6, 2, 7, 0))
        assert count_stays([ev], 1, date(2020, 6, 1), 30) == 1
        assert count_stays([ev], 1, date(2020, 6, 30), 29) == 0  # window starts June 2

    def test_other_clients_and_services_ignored(self):
        evs = [stay(2, D), event(1, "Food Bank", D, minutes=200)]
        assert count_stays(evs, 1, D, 365) == 0

    def test_empty_events(self):
        assert count_stays([], 1, D, 365) == 0

    def test_bad_window_raises(self):
        with pytest.raises(ValueError):
            count_stays([], 1, D, 0)

    def test_random_timelines_match_brute_force(self):
        rng = np.random.default_rng(123)
        for _ in range(300):
            evs = []
            for cid in (1, 2):
                n = rng.integers(0, 60)
                offs = rng.integers(0, 400, size=n)
                for off in offs:
                    d = D - timedelta(days=int(off))
                    evs.append(stay(cid, d, int(rng.integers(1, 300)),
                                    hour=int(rng.integers(0, 24))))
            wd = int(rng.integers(1, 400))
            end = D - timedelta(days=int(rng.integers(0, 30)))
            assert count_stays(evs, 1, end, wd) == brute_count(evs, 1, end, wd)


class TestChronicLabel:
    def _n_stays(self, n):
        return [stay(1, D - timedelta(days=i), 30) for i in range(n)]

    def test_threshold_boundary(self):
        assert is_chronic(self._n_stays(180), 1, D)
        assert not is_chronic(self._n_stays(179), 1, D)

    def test_label_uses_180_day_horizon(self):
        # stays occupy (D, D+180]; chronic at D+180, not at D
        evs = [stay(1, D + timedelta(days=i), 30) for i in range(1, 181)]
        assert label_example(evs, 1, D) == 1
        assert not is_chronic(evs, 1, D)

    def test_no_events_labels_zero(self):
        assert label_example([], 1, D) == 0


class TestDynamicFeatures:
    def test_no_events_all_zero(self):
        schema = default_schema()
        out = dynamic_features([], 1, D, schema)
        assert out.shape == (6, 10)
        assert not out.any()

    def test_stay_45_days_back_lands_in_row_1(self):
        schema = default_schema()
        out = dynamic_features([stay(1, D - timedelta(days=45))], 1, D, schema)
        s = schema.dynamic_services.index("Stay")
        assert out[1, s] == 1
        out[1, s] = 0
        assert not out.any()

    def test_30_case_management_days_in_current_row(self):
        schema = default_schema()
        evs = [event(1, "Case Management", D - timedelta(days=i)) for i in range(30)]
        out = dynamic_features(evs, 1, D, schema)
        s = schema.dynamic_services.index("Case Management")
        assert out[0, s] == 30
        assert out[1:, s].sum() == 0

    def test_day_count_vs_event_count_semantics(self):
        schema = default_schema()
        # two same-day stays -> 1 (day count); two same-day turnaways -> 2
        evs = [stay(1, D, hour=8), stay(1, D, hour=20),
               event(1, "Turnaways", D), event(1, "Turnaways", D)]
        out = dynamic_features(evs, 1, D, schema)
        assert out[0, schema.dynamic_services.index("Stay")] == 1
        assert out[0, schema.dynamic_services.index("Turnaways")] == 2

    def test_windows_before_first_record_are_zero(self):
        schema = default_schema()
        out = dynamic_features([stay(1, D)], 1, D + timedelta(days=200), schema)
        assert out.sum() == 0  # all six windows end before... no: stay too old
        out = dynamic_features([stay(1, D)], 1, D + timedelta(days=100), schema)
        assert out[3, schema.dynamic_services.index("Stay")] == 1


class TestStaticFeatures:
    def _client(self, **kw):
        kw.setdefault("birth_date", date(1990, 6, 1))
        kw.setdefault("weight_kg", 70.0)
        kw.setdefault("svcf_values", {})
        kw.setdefault("mvcf_values", {})
        return ClientAttributes(client_id=1, **kw)

    def test_age_exact_birthday(self):
        c = self._client(birth_date=date(1990, 6, 1))
        st_ = static_features(c, [], date(2020, 6, 1), default_schema())
        assert st_.numeric["CurrentAge"] == 30.0

    def test_age_day_before_birthday(self):
        c = self._client(birth_date=date(1990, 6, 2))
        st_ = static_features(c, [], date(2020, 6, 1), default_schema())
        assert st_.numeric["CurrentAge"] == 29.0

    def test_no_spdat_score_is_missing(self):
        st_ = static_features(self._client(), [], D, default_schema())
        assert st_.numeric["TotalScore"] is None

    def test_score_hidden_before_last_spdat_event(self):
        c = self._client(latest_spdat_score=8)
        evs = [event(1, "SPDAT", D + timedelta(days=40))]
        before = static_features(c, evs, D, default_schema())
        after = static_features(c, evs, D + timedelta(days=40), default_schema())
        assert before.numeric["TotalScore"] is None
        assert after.numeric["TotalScore"] == 8.0

    def test_totals_are_cumulative_day_counts(self):
        evs = [stay(1, D - timedelta(days=i)) for i in (0, 1, 1, 400)]
        st_ = static_features(self._client(), evs, D, default_schema())
        assert st_.numeric["Total_Stay"] == 3.0  # same-day pair dedups
        st_past = static_features(self._client(), evs, D - timedelta(days=2), default_schema())
        assert st_past.numeric["Total_Stay"] == 1.0


class TestImputeAndEncode:
    def test_impute_rules(self):
        assert impute(None, "numeric") == 0.0
        assert impute(None, "weight_or_spdat") == -1.0
        assert impute(None, "svcf") == "Unknown"
        assert impute(None, "mvcf") == frozenset()
        assert impute(7.5, "numeric") == 7.5
        with pytest.raises(ValueError):
            impute(None, "bogus")

    def test_one_hot_layout(self, tiny_schema):
        state = ClientState(
            numeric={"CurrentAge": 30.0, "Total_Stay": 2.0},
            svcf_values={"Color": "Blue"},
            mvcf_values={"Tag": frozenset({"A", "B"})},
            dynamic=np.zeros((2, 3)),
        )
        x = encode(state, tiny_schema)
        assert x.shape == (tiny_schema.vector_length,)
        sl = tiny_schema.svcf_slices["Color"]
        assert list(x[sl]) == [0.0, 1.0, 0.0]  # (Red, Blue, Unknown)
        assert list(x[tiny_schema.mvcf_slices["Tag"]]) == [1.0, 1.0]

    def test_missing_svcf_encodes_unknown(self, tiny_schema):
        state = ClientState(numeric={}, svcf_values={}, mvcf_values={}, dynamic=None)
        x = encode(state, tiny_schema)
        assert list(x[tiny_schema.svcf_slices["Color"]]) == [0.0, 0.0, 1.0]
        assert x[0] == 0.0 and x[1] == 0.0  # missing numerics -> 0

    def test_out_of_domain_svcf_warns_and_maps_unknown(self, tiny_schema):
        state = ClientState(numeric={}, svcf_values={"Color": "Chartreuse"},
                            mvcf_values={}, dynamic=None)
        with pytest.warns(UserWarning, match="Chartreuse"):
            x = encode(state, tiny_schema)
        assert list(x[tiny_schema.svcf_slices["Color"]]) == [0.0, 0.0, 1.0]

    def test_unknown_mvcf_value_dropped_with_warning(self, tiny_schema):
        state = ClientState(numeric={}, svcf_values={},
                            mvcf_values={"Tag": frozenset({"A", "Z"})}, dynamic=None)
        with pytest.warns(UserWarning, match="'Z'"):
            x = encode(state, tiny_schema)
        assert list(x[tiny_schema.mvcf_slices["Tag"]]) == [1.0, 0.0]

    def test_wrong_dynamic_shape_raises(self, tiny_schema):
        state = ClientState(numeric={}, svcf_values={}, mvcf_values={},
                            dynamic=np.zeros((3, 3)))
        with pytest.raises(ValueError):
            encode(state, tiny_schema)

    def test_decode_encode_identity(self, tiny_schema):
        for svcf_val in ("Red", "Blue", "Unknown"):
            for tags in (frozenset(), frozenset({"A"}), frozenset({"A", "B"})):
                state = ClientState(numeric={}, svcf_values={"Color": svcf_val},
                                    mvcf_values={"Tag": tags}, dynamic=None)
                svcf, mvcf = decode_categoricals(encode(state, tiny_schema), tiny_schema)
                assert svcf["Color"] == svcf_val
                assert mvcf["Tag"] == tags

    @given(st.integers(0, 3))
    def test_svcf_group_always_one_hot(self, gender_i):
        schema = default_schema()
        state = ClientState(
            numeric={},
            svcf_values={"Gender": schema.svcf_domains["Gender"][gender_i]},
            mvcf_values={},
            dynamic=None,
        )
        x = encode(state, schema)
        for name, _ in schema.svcf:
            assert x[schema.svcf_slices[name]].sum() == 1.0


class TestScaler:
    def test_formula_on_1_2_3(self, tiny_schema):
        X = np.zeros((3, tiny_schema.vector_length))
        X[:, 0] = [1.0, 2.0, 3.0]
        sc = fit_scaler(X, tiny_schema)
        out = sc.transform(X)
        np.testing.assert_allclose(out[:, 0], [-1.2247, 0.0, 1.2247], atol=1e-4)

    def test_train_columns_standardized_to_machine_precision(self, tiny_schema):
        rng = np.random.default_rng(0)
        X = np.abs(rng.normal(5.0, 3.0, size=(50, tiny_schema.vector_length)))
        sc = fit_scaler(X, tiny_schema)
        out = sc.transform(X)
        cols = out[:, tiny_schema.numeric_indices]
        assert np.abs(cols.mean(axis=0)).max() < 1e-9
        assert np.abs(cols.std(axis=0) - 1.0).max() < 1e-9

    def test_constant_column_passes_through_flagged(self, tiny_schema):
        X = np.ones((4, tiny_schema.vector_length)) * 7.0
        X[:, 1] = np.arange(4)
        sc = fit_scaler(X, tiny_schema)
        assert sc.constant[0] and not sc.constant[1]
        out = sc.transform(X)
        np.testing.assert_array_equal(out[:, 0], X[:, 0])

    def test_categorical_bits_never_scaled(self, tiny_schema):
        rng = np.random.default_rng(1)
        X = rng.random((10, tiny_schema.vector_length)) + 1.0
        sc = fit_scaler(X, tiny_schema)
        out = sc.transform(X)
        sl = tiny_schema.svcf_slices["Color"]
        np.testing.assert_array_equal(out[:, sl], X[:, sl])

    def test_val_uses_train_statistics(self, tiny_schema):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(40, tiny_schema.vector_length))
        sc = fit_scaler(X, tiny_schema)
        shifted = X + 5.0
        out = sc.transform(shifted)[:, tiny_schema.numeric_indices]
        # a refit would re-center to 0; train stats leave the shift visible
        assert out.mean() > 1.0

    def test_raw_matrix_needs_schema(self):
        with pytest.raises(ValueError, match="schema"):
            fit_scaler(np.ones((3, 5)))

    def test_empty_train_raises(self, tiny_schema):
        with pytest.raises(ValueError, match="empty"):
            fit_scaler(np.zeros((0, tiny_schema.vector_length)), tiny_schema)

    def test_apply_to_dataset_attaches_scaler(self, tiny_schema):
        from conftest import random_dataset

        ds = random_dataset(tiny_schema, 12, np.random.default_rng(3))
        sc = fit_scaler(ds)
        out = apply_scaler(sc, ds)
        assert out.scaler is sc
        assert len(out) == len(ds)
        assert [e.client_id for e in out.examples] == [e.client_id for e in ds.examples]


def _single_client_rs(days, data_end, cid=1):
    c = ClientAttributes(client_id=cid, birth_date=date(1985, 1, 1), weight_kg=None,
                         svcf_values={}, mvcf_values={})
    evs = tuple(stay(cid, d) for d in days)
    return RecordSet(clients=(c,), events=evs, data_end=data_end)


class TestGridAndBuild:
    def test_grid_arithmetic_400_day_span(self):
        schema = default_schema()
        first = date(2020, 1, 1)
        rs = _single_client_rs([first], first + timedelta(days=399))
        grid = grid_dates(rs, schema)
        assert grid[0] == first + timedelta(days=29)
        cutoff = first + timedelta(days=399 - 180)
        assert all(g <= cutoff for g in grid)
        assert grid[-1] + timedelta(days=30) > cutoff
        assert all((b - a).days == 30 for a, b in zip(grid, grid[1:]))

    def test_grid_empty_when_no_events(self):
        rs = RecordSet(clients=(), events=(), data_end=D)
        assert grid_dates(rs, default_schema()) == ()

    def test_grid_empty_when_horizon_eats_span(self):
        first = date(2020, 1, 1)
        rs = _single_client_rs([first], first + timedelta(days=200))
        assert grid_dates(rs, default_schema()) == ()

    def test_no_clients_empty_dataset(self):
        ds = build_dataset(RecordSet((), (), D), default_schema())
        assert len(ds) == 0

    def test_examples_start_at_clients_first_record(self):
        schema = default_schema()
        first = date(2020, 1, 1)
        late_start = first + timedelta(days=100)
        c1 = ClientAttributes(1, date(1985, 1, 1), None, {}, {})
        c2 = ClientAttributes(2, date(1985, 1, 1), None, {}, {})
        evs = (stay(1, first), stay(2, late_start))
        rs = RecordSet((c1, c2), evs, first + timedelta(days=500))
        ds = build_dataset(rs, schema)
        d1 = [e.date for e in ds.examples if e.client_id == 1]
        d2 = [e.date for e in ds.examples if e.client_id == 2]
        assert min(d1) == first + timedelta(days=29)
        assert min(d2) >= late_start
        assert set(d2) <= set(d1)  # shared global grid

    def test_vectors_match_schema_and_labels_match_oracle(self):
        schema = default_schema()
        from shelterrisk.synth import SynthConfig, generate_synthetic

        rs = generate_synthetic(SynthConfig(n_clients=30), seed=9)
        ds = build_dataset(rs, schema)
        assert ds.X.shape[1] == schema.vector_length
        rng = np.random.default_rng(0)
        for i in rng.choice(len(ds), size=25, replace=False):
            e = ds.examples[int(i)]
            assert e.y == label_example(rs.events, e.client_id, e.date)

    def test_example_vector_contents_for_hand_built_client(self):
        schema = default_schema()
        first = date(2020, 1, 1)
        days = [first, first + timedelta(days=35), first + timedelta(days=36)]
        rs = _single_client_rs(days, first + timedelta(days=400))
        ds = build_dataset(rs, schema)
        e = ds.examples[2]  # grid date = first + 89
        assert e.date == first + timedelta(days=89)
        assert e.x[schema.numeric_static.index("Total_Stay")] == 3.0
        s = schema.dynamic_services.index("Stay")
        assert e.x[schema.dynamic_index(1, "Stay")] == 2.0  # days 35,36 in (29, 59]
        assert e.x[schema.dynamic_index(2, "Stay")] == 1.0
        assert e.x[schema.numeric_static.index("TotalScore")] == -1.0
        assert e.x[schema.numeric_static.index("ClientWeightKG")] == -1.0


class TestPartition:
    def _ds(self, steps=10, per_date=4):
        rng = np.random.default_rng(5)
        from conftest import random_dataset

        return random_dataset(default_schema(), steps * per_date, rng, per_date=per_date)

    def test_fold_1_keeps_everything(self):
        ds = self._ds()
        train, val, test = partition(ds, 1)
        assert test.distinct_dates[0] == ds.distinct_dates[-1]
        assert val.distinct_dates[0] == ds.distinct_dates[-2]
        assert len(train) + len(val) + len(test) == len(ds)

    def test_fold_3_on_10_steps(self):
        ds = self._ds(10)
        train, val, test = partition(ds, 3)
        dates = ds.distinct_dates
        assert test.distinct_dates == (dates[7],)
        assert val.distinct_dates == (dates[6],)
        assert max(train.distinct_dates) == dates[5]

    def test_no_leakage_and_disjoint(self):
        ds = self._ds(8)
        for k in (1, 2, 4):
            train, val, test = partition(ds, k)
            assert max(train.distinct_dates) < val.distinct_dates[0] < test.distinct_dates[0]
            keys = lambda d: {(e.client_id, e.date) for e in d.examples}
            assert not (keys(train) & keys(val))
            assert not (keys(val) & keys(test))
            assert not (keys(train) & keys(test))

    def test_too_few_steps_raises(self):
        ds = self._ds(4)
        with pytest.raises(ValueError, match="fold 3 needs >= 5 time steps"):
            partition(ds, 3)

    def test_bad_fold_index(self):
        with pytest.raises(ValueError):
            partition(self._ds(4), 0)


class TestDatasetPersistence:
    def test_round_trip(self, tmp_path, tiny_schema):
        from conftest import random_dataset

        ds = random_dataset(tiny_schema, 15, np.random.default_rng(8), per_date=5)
        sc = fit_scaler(ds)
        ds2 = apply_scaler(sc, ds)
        p = tmp_path / "data.csv"
        save_dataset(ds2, p)
        back = load_dataset(p)
        assert back.schema == ds2.schema
        np.testing.assert_array_equal(back.X, ds2.X)
        np.testing.assert_array_equal(back.y, ds2.y)
        assert back.scaler is not None
        np.testing.assert_array_equal(back.scaler.means, sc.means)

    def test_missing_sidecar(self, tmp_path, tiny_schema):
        from conftest import random_dataset

        ds = random_dataset(tiny_schema, 4, np.random.default_rng(0))
        p = tmp_path / "data.csv"
        save_dataset(ds, p)
        p.with_suffix(".json").unlink()
        with pytest.raises(FileNotFoundError, match="sidecar"):
            load_dataset(p)

    def test_header_schema_mismatch(self, tmp_path, tiny_schema):
        from conftest import random_dataset

        ds = random_dataset(tiny_schema, 4, np.random.default_rng(0))
        p = tmp_path / "data.csv"
        save_dataset(ds, p)
        lines = p.read_text().splitlines()
        lines[0] = lines[0].replace("CurrentAge", "Age")
        p.write_text("\n".join(lines) + "\n")
        with pytest.raises(ValueError, match="header"):
            load_dataset(p)

    def test_duplicate_keys_rejected(self, tiny_schema):
        x = np.zeros(tiny_schema.vector_length)
        with pytest.raises(ValueError, match="duplicate"):
            Dataset(tiny_schema, (Example(1, D, x, 0), Example(1, D, x, 1)))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 500), max_size=40), st.integers(1, 400), st.integers(1, 400))
def test_count_stays_monotone_in_window(offsets, w1, w2):
    evs = [stay(1, D - timedelta(days=o)) for o in set(offsets)]
    lo, hi = sorted((w1, w2))
    assert count_stays(evs, 1, D, lo) <= count_stays(evs, 1, D, hi) <= len(set(offsets))
