"""Streaming PM10/PM1.0-ratio gate for condensation-corrupted measurements.

A moving window holds recent accepted ratios; a new measurement under high
humidity is rejected when its ratio is a statistical outlier relative to the
window (mean + beta * sd).  Low-concentration rows bypass the gate entirely:
their ratios are unstable because the denominator is small, and no
misdetection was attributable to them.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable

from .errors import ConfigurationError
from .statcore import sample_stats
from .timeseries import Series


@dataclass(frozen=True)
class CleanseConfig:
    """User-configurable gate parameters (defaults are field-tuned values)."""

    beta: float = 2.5
    c_low: float = 20.0
    h_low: float = 80.0
    window_size: int = 30

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.c_low < 0:
            raise ValueError("c_low must be >= 0")
        if not (0.0 <= self.h_low <= 100.0):
            raise ValueError("h_low must lie in [0, 100]")
        if self.window_size < 3:
            raise ValueError("window_size must be >= 3")


@dataclass(frozen=True)
class RatioWindowState:
    """FIFO of exactly window_size accepted ratios, oldest first."""

    ratios: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "ratios", tuple(float(r) for r in self.ratios))
        if len(self.ratios) < 3:
            raise ValueError("ratio window must hold at least 3 entries")
        if any(not math.isfinite(r) or r <= 0 for r in self.ratios):
            raise ValueError("window ratios must be positive and finite")

    def mean_sd(self) -> tuple[float, float]:
        stats = sample_stats(self.ratios)
        assert stats.sd is not None  # window length >= 3
        return stats.mean, stats.sd


class Verdict(enum.Enum):
    ACCEPT_NO_UPDATE = "ACCEPT_NO_UPDATE"
    ACCEPT_UPDATE = "ACCEPT_UPDATE"
    REJECT = "REJECT"


@dataclass(frozen=True)
class CleanseDecision:
    """Outcome of one gate step; ratio is None when pm1 was zero."""

    verdict: Verdict
    ratio: float | None
    window_mean: float
    window_sd: float
    note: str | None = None


@dataclass(frozen=True)
class AuditRecord:
    timestamp: int
    ratio: float | None
    window_mean: float
    window_sd: float
    verdict: Verdict
    note: str | None = None


@dataclass(frozen=True)
class CleanseResult:
    cleansed: Series
    rejected_timestamps: tuple[int, ...]
    audit: tuple[AuditRecord, ...]
    final_state: RatioWindowState


def init_window(
    warmup: Iterable[tuple[float, float, float, float]],
    config: CleanseConfig,
    fallback_ratio: float = 3.0,
) -> RatioWindowState:
    """Seed the window from recent dry, high-enough-concentration readings.

    Warmup rows are (pm1, pm25, pm10, rh) tuples; a row qualifies when
    rh < h_low, pm25 >= c_low, and pm1 > 0.  The newest qualifying ratios sit
    last; unfilled slots are padded in front with ``fallback_ratio``.
    """
    if not (fallback_ratio > 0 and math.isfinite(fallback_ratio)):
        raise ValueError("fallback ratio must be positive and finite")
    qualifying = [
        pm10 / pm1
        for pm1, pm25, pm10, rh in warmup
        if rh < config.h_low and pm25 >= config.c_low and pm1 > 0
    ]
    tail = qualifying[-config.window_size:]
    padding = [fallback_ratio] * (config.window_size - len(tail))
    return RatioWindowState(tuple(padding + tail))


def cleanse_step(
    state: RatioWindowState,
    pm: tuple[float, float, float],
    rh: float,
    config: CleanseConfig,
) -> tuple[RatioWindowState, CleanseDecision]:
    """Run one gate step; a rejected step never mutates the window."""
    if len(state.ratios) != config.window_size:
        raise ConfigurationError(
            f"window holds {len(state.ratios)} ratios, expected {config.window_size}"
        )
    pm1, pm25, pm10 = pm
    if not (0.0 <= pm1 <= pm25 <= pm10):
        raise ValueError(f"PM channels must satisfy 0 <= pm1 <= pm25 <= pm10, got {pm}")

    mean, sd = state.mean_sd()
    ratio = pm10 / pm1 if pm1 > 0 else None
    if ratio is not None and not math.isfinite(ratio):
        ratio = None  # pm1 small enough to overflow the ratio: same as undefined

    if pm25 < config.c_low:
        decision = CleanseDecision(Verdict.ACCEPT_NO_UPDATE, ratio, mean, sd)
        return state, decision
    if ratio is None:
        decision = CleanseDecision(
            Verdict.ACCEPT_NO_UPDATE, None, mean, sd,
            note="ratio undefined (pm1 ~ 0) at high pm25; accepted without update",
        )
        return state, decision
    if rh < config.h_low or ratio < mean + config.beta * sd:
        new_state = RatioWindowState(state.ratios[1:] + (ratio,))
        return new_state, CleanseDecision(Verdict.ACCEPT_UPDATE, ratio, mean, sd)
    return state, CleanseDecision(Verdict.REJECT, ratio, mean, sd)


def cleanse_series(
    pm_series: Series,
    rh_source: Series,
    config: CleanseConfig,
    init: RatioWindowState,
) -> CleanseResult:
    """Single forward pass of the gate over a series, in timestamp order.

    RH comes from a separate collocated series (PM sensors frequently lack an
    RH channel).  Rows that cannot be gated -- invalid, missing a PM channel,
    or lacking an RH reading -- pass through unchanged with an annotation.
    Rejected rows are removed from the output and listed for audit.

    The pass is order dependent by design: the window state evolves with the
    stream, so permuting input rows may change individual decisions.
    """
    if pm_series.interval != rh_source.interval:
        raise ConfigurationError(
            f"interval mismatch: pm {pm_series.interval} s vs rh {rh_source.interval} s"
        )
    pm_phase, rh_phase = pm_series.phase(), rh_source.phase()
    if pm_phase is not None and rh_phase is not None and pm_phase != rh_phase:
        raise ConfigurationError("pm and rh series are on different grid phases")

    rh_map = {
        s.timestamp: s.rh for s in rh_source.samples if s.valid and s.rh is not None
    }
    state = init
    kept = []
    rejected: list[int] = []
    audit: list[AuditRecord] = []
    for sample in pm_series.samples:
        mean, sd = state.mean_sd()
        if not sample.valid or sample.pm1 is None or sample.pm25 is None or sample.pm10 is None:
            kept.append(sample)
            audit.append(AuditRecord(
                sample.timestamp, None, mean, sd, Verdict.ACCEPT_NO_UPDATE,
                note="not gated: invalid sample or missing PM channel",
            ))
            continue
        rh = rh_map.get(sample.timestamp)
        if rh is None:
            kept.append(sample)
            audit.append(AuditRecord(
                sample.timestamp, None, mean, sd, Verdict.ACCEPT_NO_UPDATE,
                note="not gated: no RH reading at this timestamp",
            ))
            continue
        state, decision = cleanse_step(
            state, (sample.pm1, sample.pm25, sample.pm10), rh, config
        )
        audit.append(AuditRecord(
            sample.timestamp, decision.ratio, decision.window_mean,
            decision.window_sd, decision.verdict, decision.note,
        ))
        if decision.verdict is Verdict.REJECT:
            rejected.append(sample.timestamp)
        else:
            kept.append(sample)

    cleansed = Series(pm_series.device_id, pm_series.interval, tuple(kept))
    return CleanseResult(cleansed, tuple(rejected), tuple(audit), state)


def warmup_rows_from_series(
    pm_series: Series, rh_source: Series, limit: int
) -> list[tuple[float, float, float, float]]:
    """Collect (pm1, pm25, pm10, rh) rows from the head of a series for window
    initialization."""
    rh_map = {
        s.timestamp: s.rh for s in rh_source.samples if s.valid and s.rh is not None
    }
    rows = []
    for sample in pm_series.samples[: max(0, limit)]:
        if not sample.valid:
            continue
        if sample.pm1 is None or sample.pm25 is None or sample.pm10 is None:
            continue
        rh = rh_map.get(sample.timestamp)
        if rh is None:
            continue
        rows.append((sample.pm1, sample.pm25, sample.pm10, rh))
    return rows
