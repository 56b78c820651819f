"""Synthetic shelter populations with a configurable planted risk signal.

Clients are drawn from two latent classes. High-risk clients ramp up their
shelter use (a moderate-frequency ramp phase, then a high-frequency steady
state whose density drifts month to month), never receive housing subsidies,
and are older than 52 — three drivers an explainer should be able to
recover. Low-risk clients mix steady light users with episodic "decoys"
whose bursts of elevated use resemble the high phase but fall short of the
chronic threshold; decoys are mostly subsidized and skew younger, so the
markers are what separates them from the planted class.

The steady-state density range deliberately straddles 180/365: clients near
the threshold drift across it, so their labels are genuinely uncertain given
any observation window. That keeps the learnable signal probabilistic (a
model must produce graded scores rather than memorizing a separable rule),
which mirrors the precision/recall tension of the real task.

The fraction of high-risk clients is calibrated by Monte Carlo (with a
fixed internal seed, so it is a pure function of the config) to hit a
target example-level positive rate. `rule_strength` interpolates the
high-risk class toward the low-risk distribution: at 0 the signal
disappears entirely.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import date, datetime, time, timedelta
from pathlib import Path

import numpy as np

from .pipeline import CHRONIC_STAY_THRESHOLD, CHRONIC_WINDOW_DAYS, LABEL_HORIZON_DAYS
from .records import ClientAttributes, RecordSet, ServiceEvent
from .schema import UNKNOWN, default_schema

_CAL_SEED = 0xC0FFEE  # internal calibration stream; never the user's seed
_CAL_SIMS = 400  # simulated clients per class for rate calibration
_AR_SIGMA = 0.15  # month-to-month density drift of the high phase
_AR_RHO = 0.55  # AR(1) correlation between consecutive months


@dataclass(frozen=True)
class SynthConfig:
    n_clients: int = 1000
    start: date = date(2019, 1, 1)
    end: date = date(2020, 12, 31)
    target_positive_rate: float = 0.065
    rule_strength: float = 1.0
    # Staggered intake turns every uniform-rate service into a proxy for
    # tenure (a hit in an old window implies a long history), which swamps
    # the planted markers; start everyone together by default.
    max_start_lag_days: int = 0
    stay_qualify_prob: float = 0.97  # visits >= 15 min; the rest are too short
    base_stay_range: tuple[float, float] = (0.02, 0.18)
    decoy_fraction: float = 0.25
    subsidized_fraction: float = 0.65
    texture_rate: float = 0.03

    def __post_init__(self):
        if self.n_clients < 0:
            raise ValueError("n_clients must be >= 0")
        if not 0.0 <= self.target_positive_rate < 1.0:
            raise ValueError("target_positive_rate must be in [0, 1)")
        if not 0.0 <= self.rule_strength <= 1.0:
            raise ValueError("rule_strength must be in [0, 1]")
        if self.end <= self.start:
            raise ValueError("end must be after start")
        if not 0.0 < self.stay_qualify_prob <= 1.0:
            raise ValueError("stay_qualify_prob must be in (0, 1]")

    @property
    def span_days(self) -> int:
        return (self.end - self.start).days + 1

    def to_dict(self) -> dict:
        d = {
            "n_clients": self.n_clients,
            "start": self.start.isoformat(),
            "end": self.end.isoformat(),
            "target_positive_rate": self.target_positive_rate,
            "rule_strength": self.rule_strength,
            "max_start_lag_days": self.max_start_lag_days,
            "stay_qualify_prob": self.stay_qualify_prob,
            "base_stay_range": list(self.base_stay_range),
            "decoy_fraction": self.decoy_fraction,
            "subsidized_fraction": self.subsidized_fraction,
            "texture_rate": self.texture_rate,
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        kw = dict(d)
        if "start" in kw:
            kw["start"] = date.fromisoformat(kw["start"])
        if "end" in kw:
            kw["end"] = date.fromisoformat(kw["end"])
        if "base_stay_range" in kw:
            kw["base_stay_range"] = tuple(kw["base_stay_range"])
        return cls(**kw)

    @classmethod
    def from_json(cls, path: str | Path) -> "SynthConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _lerp(a: float, b: float, s: float) -> float:
    return a + (b - a) * s


@dataclass
class _Profile:
    """Latent per-client stay process; shared by generator and calibrator."""

    high: bool
    astart: int  # active-start offset (days from cfg.start)
    age_years: float
    ramp_len: int
    q_ramp: float
    q_high: float
    q_base: float
    burst_start: int  # -1 when not a decoy
    burst_len: int
    q_burst: float
    subsidized: bool
    onset: int = 0  # high-risk: days at base rate before the ramp begins
    steady_len: int = 10**9  # high-risk: steady-phase duration before decline


def _sample_profile(rng: np.random.Generator, high: bool, cfg: SynthConfig) -> _Profile:
    s = cfg.rule_strength
    max_lag = min(cfg.max_start_lag_days, cfg.span_days - 1)
    astart = int(rng.integers(0, max_lag + 1))
    lo, hi = cfg.base_stay_range
    if high:
        age = rng.uniform(_lerp(18.0, 53.0, s), 80.0)
        q_ramp = rng.uniform(_lerp(lo, 0.25, s), _lerp(hi, 0.55, s))
        # the low end of the steady-state density sits under 180/365, so a
        # wide slice of the class hovers at the chronic threshold and drifts
        # across it month to month — labels there are genuinely uncertain
        q_high = rng.uniform(_lerp(lo, 0.50, s), _lerp(hi, 0.95, s))
        ramp_len = int(rng.integers(120, 331))
        subsidized = bool(rng.random() < _lerp(cfg.subsidized_fraction, 0.0, s))
        # A base-rate phase before the ramp: mid-ramp clients then look just
        # like mid-burst decoys on counts, and only the markers separate them.
        onset = int(rng.integers(0, 361))
        # Episodes resolve: the steady phase ends and use falls back to the
        # base rate. Staggered onsets and exits keep the per-date positive
        # rate roughly flat, so no feature can act as a calendar-date proxy.
        steady_len = int(rng.integers(240, 481))
        return _Profile(True, astart, age, ramp_len, q_ramp, q_high,
                        rng.uniform(lo, hi), -1, 0, 0.0, subsidized,
                        onset=onset, steady_len=steady_len)
    # Low-risk ages cap just above the marker cutoff (slight overlap), so the
    # top age quartile is dominated by the planted class.
    age = rng.uniform(18.0, 58.0)
    if rng.random() < cfg.decoy_fraction:
        # Decoy bursts share the ramp's density and length ranges, so counts
        # alone cannot tell a mid-burst decoy from a mid-ramp high-risk
        # client — only the markers can. Decoys are mostly subsidized, and
        # their ages reach past the cutoff often enough that age alone is
        # not a sufficient rejector either: both markers have to be learned.
        age = rng.uniform(18.0, 70.0)
        subsidized = bool(rng.random() < 0.85)
        burst_start = int(rng.integers(0, 361))
        burst_len = int(rng.integers(120, 301))
        q_burst = rng.uniform(0.25, 0.52)
        return _Profile(False, astart, age, 0, 0.0, 0.0,
                        rng.uniform(lo, hi), burst_start, burst_len, q_burst, subsidized)
    subsidized = bool(rng.random() < cfg.subsidized_fraction)
    return _Profile(False, astart, age, 0, 0.0, 0.0,
                    rng.uniform(lo, hi), -1, 0, 0.0, subsidized)


def _stay_day_offsets(
    rng: np.random.Generator, p: _Profile, cfg: SynthConfig
) -> tuple[np.ndarray, np.ndarray]:
    """(qualifying, sub-15-minute) stay-day offsets from cfg.start, sorted."""
    n_active = cfg.span_days - p.astart
    if n_active <= 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty
    q = np.full(n_active, p.q_base)
    if p.high:
        steady_from = p.onset + p.ramp_len
        n_steady = min(n_active, steady_from + p.steady_len) - steady_from
        if n_steady > 0:
            # steady state: monthly AR(1) drift around the client's own density
            n_blocks = (n_steady + 29) // 30
            z = rng.normal(size=n_blocks)
            for t in range(1, n_blocks):
                z[t] = _AR_RHO * z[t - 1] + np.sqrt(1.0 - _AR_RHO**2) * z[t]
            steady = np.repeat(np.clip(p.q_high + _AR_SIGMA * z, 0.02, 0.98), 30)
            q[steady_from : steady_from + n_steady] = steady[:n_steady]
        q[p.onset : steady_from] = p.q_ramp
    elif p.burst_start >= 0:
        q[p.burst_start : p.burst_start + p.burst_len] = p.q_burst
    days = np.flatnonzero(rng.random(n_active) < q) + p.astart
    qual = rng.random(days.size) < cfg.stay_qualify_prob
    return days[qual], days[~qual]


def _label_grid(cfg: SynthConfig) -> np.ndarray:
    """Grid step-end offsets with labelable dates, assuming anchor = cfg.start."""
    cutoff = cfg.span_days - 1 - LABEL_HORIZON_DAYS
    if cutoff < 29:
        return np.empty(0, dtype=np.int64)
    return np.arange(29, cutoff + 1, 30, dtype=np.int64)


def _examples_and_positives(qual_days: np.ndarray, astart: int, grid: np.ndarray) -> tuple[int, int]:
    g = grid[grid >= astart]
    if g.size == 0:
        return 0, 0
    hi = g + LABEL_HORIZON_DAYS
    counts = np.searchsorted(qual_days, hi, side="right") - np.searchsorted(
        qual_days, hi - CHRONIC_WINDOW_DAYS, side="right"
    )
    return int(g.size), int((counts >= CHRONIC_STAY_THRESHOLD).sum())


def calibrate_high_risk_fraction(cfg: SynthConfig) -> float:
    """Solve for the high-risk class probability hitting the target rate.

    Deterministic per cfg (fixed internal seed). Raises ValueError when no
    class mix can reach the target.
    """
    if cfg.target_positive_rate == 0.0:
        if cfg.rule_strength > 0.0:
            raise ValueError(
                "target_positive_rate 0 with rule_strength > 0 is contradictory: "
                "the planted class would produce positives"
            )
        return 0.0
    grid = _label_grid(cfg)
    if grid.size == 0:
        raise ValueError(
            "date span too short: no labelable time steps "
            f"({cfg.start}..{cfg.end} with a {LABEL_HORIZON_DAYS}-day horizon)"
        )
    rng = np.random.default_rng(_CAL_SEED)
    stats = {}
    for high in (True, False):
        n_ex = n_pos = 0
        for _ in range(_CAL_SIMS):
            p = _sample_profile(rng, high, cfg)
            qual, _ = _stay_day_offsets(rng, p, cfg)
            e, pos = _examples_and_positives(qual, p.astart, grid)
            n_ex += e
            n_pos += pos
        stats[high] = (n_ex / _CAL_SIMS, n_pos / _CAL_SIMS)
    e_ex = (stats[True][0] + stats[False][0]) / 2.0
    pos_hr, pos_lr = stats[True][1], stats[False][1]
    if pos_hr <= pos_lr:
        raise ValueError(
            "planted rule produces no label contrast (rule_strength too small?)"
        )
    frac = (cfg.target_positive_rate * e_ex - pos_lr) / (pos_hr - pos_lr)
    if frac < 0.0:
        raise ValueError(
            f"target rate {cfg.target_positive_rate} below the low-risk base rate"
        )
    if frac > 1.0:
        raise ValueError(
            f"target rate {cfg.target_positive_rate} unreachable even with all "
            "clients high-risk"
        )
    return float(frac)


# ---------------------------------------------------------------------------
# Event materialization
# ---------------------------------------------------------------------------


def _event(cid: int, svc: str, day: date, hour: int, minute: int, dur_min: int,
           data_end: date) -> ServiceEvent:
    start = datetime.combine(day, time(hour, minute))
    end = start + timedelta(minutes=dur_min)
    limit = datetime.combine(data_end, time(23, 59))
    if end > limit:
        end = limit
    return ServiceEvent(cid, svc, start, end)


def _day(cfg: SynthConfig, offset: int) -> date:
    return cfg.start + timedelta(days=int(offset))


_TEXTURE_SERVICES = (
    "Case Management",
    "Housing",
    "Storage",
    "Reservations",
    "Turnaways",
    "Food Bank",
    "Goods and Services",
)


def _client_events(
    rng: np.random.Generator, cid: int, p: _Profile, cfg: SynthConfig,
    has_spdat: bool,
) -> tuple[list[ServiceEvent], np.ndarray]:
    """All events for one client; also returns last-SPDAT day offset array."""
    events: list[ServiceEvent] = []
    de = cfg.end

    # Intake assessment on the first active day pins the client's first
    # record date (and keeps every client in the dataset).
    events.append(_event(cid, "Case Management", _day(cfg, p.astart),
                         int(rng.integers(8, 18)), int(rng.integers(0, 60)),
                         int(rng.integers(30, 61)), de))

    qual, nonqual = _stay_day_offsets(rng, p, cfg)
    for off in qual:
        hour = int(rng.integers(17, 22))
        events.append(_event(cid, "Stay", _day(cfg, off), hour,
                             int(rng.integers(0, 60)), int(rng.integers(60, 721)), de))
        if rng.random() < 0.05:  # second same-day visit; still one stay
            events.append(_event(cid, "Stay", _day(cfg, off), int(rng.integers(8, 16)),
                                 int(rng.integers(0, 60)), int(rng.integers(20, 120)), de))
    for off in nonqual:
        events.append(_event(cid, "Stay", _day(cfg, off), int(rng.integers(17, 22)),
                             int(rng.integers(0, 60)), int(rng.integers(1, 15)), de))

    n_active = cfg.span_days - p.astart
    for svc in _TEXTURE_SERVICES:
        # dense enough that per-window counts have real spread; near-constant
        # columns would turn into standardization-amplified outlier channels
        rate = rng.uniform(cfg.texture_rate / 3, cfg.texture_rate * 2)
        days = np.flatnonzero(rng.random(n_active) < rate) + p.astart
        for off in days:
            events.append(_event(cid, svc, _day(cfg, off), int(rng.integers(8, 18)),
                                 int(rng.integers(0, 60)), int(rng.integers(15, 121)), de))
            if svc == "Food Bank" and rng.random() < 0.1:
                # same-day repeat: distinct records, one day
                events.append(_event(cid, svc, _day(cfg, off), int(rng.integers(8, 18)),
                                     int(rng.integers(0, 60)), int(rng.integers(15, 61)), de))

    if p.subsidized:
        # ~50-day cadence: individual 30-day windows catch a payment only
        # about half the time, so the cumulative total carries the signal
        off = p.astart + int(rng.integers(0, 50))
        while off < cfg.span_days:
            events.append(_event(cid, "Housing Subsidy", _day(cfg, off),
                                 int(rng.integers(9, 17)), int(rng.integers(0, 60)),
                                 int(rng.integers(15, 46)), de))
            off += 50 + int(rng.integers(-10, 11))

    spdat_days = np.empty(0, dtype=np.int64)
    if has_spdat:
        n = int(rng.integers(3, 10))  # periodic reassessment, roughly quarterly
        spdat_days = np.sort(rng.integers(p.astart, cfg.span_days, size=n))
        for off in spdat_days:
            events.append(_event(cid, "SPDAT", _day(cfg, off), int(rng.integers(9, 17)),
                                 int(rng.integers(0, 60)), int(rng.integers(30, 61)), de))
    return events, spdat_days


def _client_attributes(
    rng: np.random.Generator, cid: int, p: _Profile, cfg: SynthConfig,
    spdat_score: int | None,
) -> ClientAttributes:
    schema = default_schema()
    birth = cfg.start - timedelta(days=int(p.age_years * 365.25))
    weight = None if rng.random() < 0.10 else round(float(rng.uniform(45, 110)), 1)
    svcf_values: dict[str, str] = {}
    for name, dom in schema.svcf:
        choices = [v for v in dom if v != UNKNOWN]
        if rng.random() < 0.08 or not choices:
            continue  # absent -> imputed to Unknown downstream
        svcf_values[name] = choices[int(rng.integers(0, len(choices)))]
    mvcf_values: dict[str, frozenset[str]] = {}
    for name, dom in schema.mvcf:
        if rng.random() < 0.45:
            continue
        picked = frozenset(v for v in dom if rng.random() < 0.2)
        if picked:
            mvcf_values[name] = picked
    return ClientAttributes(
        client_id=cid,
        birth_date=birth,
        weight_kg=weight,
        svcf_values=svcf_values,
        mvcf_values=mvcf_values,
        monthly_income=round(float(rng.uniform(0, 2000)), 2),
        monthly_expense=round(float(rng.uniform(0, 1500)), 2),
        latest_spdat_score=spdat_score,
    )


def generate_synthetic(cfg: SynthConfig, seed: int) -> RecordSet:
    """Deterministic synthetic RecordSet with the planted risk signal."""
    frac_high = calibrate_high_risk_fraction(cfg) if cfg.n_clients else 0.0
    rng = np.random.default_rng(seed)
    clients: list[ClientAttributes] = []
    events: list[ServiceEvent] = []
    for cid in range(1, cfg.n_clients + 1):
        high = bool(rng.random() < frac_high)
        p = _sample_profile(rng, high, cfg)
        spdat_score = int(rng.integers(0, 13)) if rng.random() < 0.7 else None
        evs, _ = _client_events(rng, cid, p, cfg, has_spdat=spdat_score is not None)
        clients.append(_client_attributes(rng, cid, p, cfg, spdat_score))
        events.extend(evs)
    return RecordSet(clients=tuple(clients), events=tuple(events), data_end=cfg.end)
