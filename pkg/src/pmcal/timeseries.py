"""Regular-interval sensor time series: containers, preprocessing, alignment.

Timestamps are UTC integer seconds. A series lives on a fixed grid
(strictly increasing timestamps, all congruent modulo the interval); grid
points may be absent, which means "no data", never "zero".
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import ConfigurationError

PM_CHANNELS = ("pm1", "pm25", "pm10")
CHANNELS = ("pm1", "pm25", "pm10", "temp", "rh", "adc")


def channel_violations(
    pm1: float | None,
    pm25: float | None,
    pm10: float | None,
    temp: float | None,
    rh: float | None,
    adc: float | None,
) -> list[str]:
    """List invariant breaches for one reading; empty when the values are sound.

    Checks: concentrations and ADC counts finite and non-negative, RH within
    [0, 100], and size-channel ordering pm1 <= pm25 <= pm10 among whichever
    PM channels are present.  Ordering breaches must be reported, never fixed
    by reordering.
    """
    problems = []
    for name, value in (("pm1", pm1), ("pm25", pm25), ("pm10", pm10), ("adc", adc)):
        if value is None:
            continue
        if not math.isfinite(value):
            problems.append(f"{name} is not finite")
        elif value < 0:
            problems.append(f"{name} is negative")
    if temp is not None and not math.isfinite(temp):
        problems.append("temp is not finite")
    if rh is not None and (not math.isfinite(rh) or rh < 0.0 or rh > 100.0):
        problems.append("rh outside [0, 100]")
    if not problems:
        if pm1 is not None and pm25 is not None and pm1 > pm25:
            problems.append("pm1 > pm25")
        if pm25 is not None and pm10 is not None and pm25 > pm10:
            problems.append("pm25 > pm10")
        if pm1 is not None and pm10 is not None and pm1 > pm10:
            problems.append("pm1 > pm10")
    return problems


@dataclass(frozen=True)
class Sample:
    """One grid reading; channels are None when the device did not report them.

    A sample constructed with valid=True must satisfy the channel invariants;
    an invalid sample keeps whatever values were observed so audits can see
    them.
    """

    timestamp: int
    pm1: float | None = None
    pm25: float | None = None
    pm10: float | None = None
    temp: float | None = None
    rh: float | None = None
    adc: float | None = None
    valid: bool = True

    def __post_init__(self):
        if self.valid:
            problems = channel_violations(
                self.pm1, self.pm25, self.pm10, self.temp, self.rh, self.adc
            )
            if problems:
                raise ValueError(
                    f"sample at {self.timestamp} marked valid but: " + "; ".join(problems)
                )

    def channels(self) -> dict[str, float | None]:
        return {name: getattr(self, name) for name in CHANNELS}


def make_sample(timestamp: int, **channels: float | None) -> Sample:
    """Build a sample, marking it invalid instead of raising when values breach
    the channel invariants (e.g. ordering broken by mixed-presence averaging)."""
    values = {name: channels.get(name) for name in CHANNELS}
    if channel_violations(**values):
        return Sample(timestamp=timestamp, valid=False, **values)
    return Sample(timestamp=timestamp, valid=True, **values)


@dataclass(frozen=True)
class Series:
    """Ordered samples of one device on a regular grid with gaps allowed."""

    device_id: str
    interval: int
    samples: tuple[Sample, ...]

    def __post_init__(self):
        if self.interval <= 0:
            raise ValueError("interval must be a positive number of seconds")
        object.__setattr__(self, "samples", tuple(self.samples))
        phase = None
        previous = None
        for sample in self.samples:
            if previous is not None and sample.timestamp <= previous:
                raise ValueError(
                    f"timestamps must strictly increase (at {sample.timestamp})"
                )
            if phase is None:
                phase = sample.timestamp % self.interval
            elif sample.timestamp % self.interval != phase:
                raise ValueError(f"timestamp {sample.timestamp} is off the grid")
            previous = sample.timestamp

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def timestamps(self) -> tuple[int, ...]:
        return tuple(s.timestamp for s in self.samples)

    def by_timestamp(self) -> dict[int, Sample]:
        return {s.timestamp: s for s in self.samples}

    def phase(self) -> int | None:
        """Grid offset (timestamp mod interval); None for an empty series."""
        if not self.samples:
            return None
        return self.samples[0].timestamp % self.interval


@dataclass(frozen=True)
class IntervalMask:
    """Half-open [start, end) UTC windows; normalized to non-overlapping form."""

    windows: tuple[tuple[int, int], ...]

    def __post_init__(self):
        merged: list[tuple[int, int]] = []
        for start, end in sorted(self.windows):
            if start >= end:
                raise ValueError(f"mask window [{start}, {end}) is empty or inverted")
            if merged and start <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], end))
            else:
                merged.append((start, end))
        object.__setattr__(self, "windows", tuple(merged))

    def contains(self, timestamp: int) -> bool:
        return any(start <= timestamp < end for start, end in self.windows)

    def union(self, other: "IntervalMask") -> "IntervalMask":
        return IntervalMask(self.windows + other.windows)


@dataclass(frozen=True)
class CollocatedPairs:
    """Time-matched candidate/reference vectors plus optional covariates."""

    timestamps: np.ndarray
    x: np.ndarray
    y: np.ndarray
    rh: np.ndarray | None = None
    temp: np.ndarray | None = None

    def __post_init__(self):
        n = len(self.timestamps)
        for name in ("x", "y", "rh", "temp"):
            column = getattr(self, name)
            if column is not None and len(column) != n:
                raise ValueError(f"column '{name}' length differs from timestamps")

    @property
    def n(self) -> int:
        return len(self.timestamps)


def average_interval(series: Series, target_interval: int) -> tuple[Series, tuple[int, ...]]:
    """Average a series into coarser windows labeled by window start.

    Each output channel is the arithmetic mean of valid inputs within
    [t, t + target_interval); windows with no valid input are omitted.
    Returns the averaged series plus the count of contributing valid samples
    per emitted window (partial edge windows are averaged over what exists).
    """
    if target_interval <= 0 or target_interval % series.interval != 0:
        raise ConfigurationError(
            f"target interval {target_interval} is not a positive multiple "
            f"of the series interval {series.interval}"
        )
    buckets: dict[int, list[Sample]] = {}
    for sample in series.samples:
        if not sample.valid:
            continue
        start = (sample.timestamp // target_interval) * target_interval
        buckets.setdefault(start, []).append(sample)

    averaged = []
    counts = []
    for start in sorted(buckets):
        members = buckets[start]
        means: dict[str, float | None] = {}
        for name in CHANNELS:
            values = [getattr(s, name) for s in members if getattr(s, name) is not None]
            means[name] = sum(values) / len(values) if values else None
        averaged.append(make_sample(start, **means))
        counts.append(len(members))
    return Series(series.device_id, target_interval, tuple(averaged)), tuple(counts)


def repair_last_valid(series: Series) -> tuple[Series, int, int]:
    """Replace invalid samples with the last valid reading (timestamp kept).

    Leading invalid samples with no predecessor are dropped.  Returns
    (repaired series, repair count, leading-drop count).
    """
    repaired: list[Sample] = []
    last_valid: Sample | None = None
    n_repaired = 0
    n_dropped = 0
    for sample in series.samples:
        if sample.valid:
            last_valid = sample
            repaired.append(sample)
        elif last_valid is None:
            n_dropped += 1
        else:
            patched = replace(
                last_valid, timestamp=sample.timestamp, valid=True
            )
            repaired.append(patched)
            n_repaired += 1
    return Series(series.device_id, series.interval, tuple(repaired)), n_repaired, n_dropped


def apply_mask(series: Series, mask: IntervalMask) -> tuple[Series, int]:
    """Drop samples whose timestamps fall inside any mask window."""
    kept = tuple(s for s in series.samples if not mask.contains(s.timestamp))
    removed = len(series.samples) - len(kept)
    return Series(series.device_id, series.interval, kept), removed


def align_collocated(
    candidate: Series,
    reference: Series,
    covariate_source: Series | None = None,
    *,
    x_channel: str = "pm25",
    y_channel: str = "pm25",
    covariates: Sequence[str] = ("rh", "temp"),
) -> CollocatedPairs:
    """Build time-synchronized candidate/reference pairs.

    A row exists exactly for grid timestamps where both series hold a valid
    sample with the requested channel present; covariate columns come from
    ``covariate_source`` (the reference by default) and a row is dropped when
    a requested covariate is missing there.
    """
    if candidate.interval != reference.interval:
        raise ConfigurationError(
            f"interval mismatch: candidate {candidate.interval} s vs "
            f"reference {reference.interval} s"
        )
    source = covariate_source if covariate_source is not None else reference
    for name in covariates:
        if name not in ("rh", "temp"):
            raise ConfigurationError(f"unknown covariate '{name}'")

    cand_map = candidate.by_timestamp()
    ref_map = reference.by_timestamp()
    cov_map = source.by_timestamp()

    timestamps: list[int] = []
    xs: list[float] = []
    ys: list[float] = []
    covs: dict[str, list[float]] = {name: [] for name in covariates}
    for t in sorted(set(cand_map) & set(ref_map)):
        cand, ref = cand_map[t], ref_map[t]
        if not (cand.valid and ref.valid):
            continue
        x = getattr(cand, x_channel)
        y = getattr(ref, y_channel)
        if x is None or y is None:
            continue
        cov_sample = cov_map.get(t)
        row_covs = {}
        for name in covariates:
            value = getattr(cov_sample, name) if cov_sample is not None else None
            if value is None:
                row_covs = None
                break
            row_covs[name] = value
        if row_covs is None:
            continue
        timestamps.append(t)
        xs.append(x)
        ys.append(y)
        for name in covariates:
            covs[name].append(row_covs[name])

    return CollocatedPairs(
        timestamps=np.asarray(timestamps, dtype=np.int64),
        x=np.asarray(xs, dtype=float),
        y=np.asarray(ys, dtype=float),
        rh=np.asarray(covs["rh"], dtype=float) if "rh" in covs else None,
        temp=np.asarray(covs["temp"], dtype=float) if "temp" in covs else None,
    )


def completeness(series: Series, expected_schedule: Sequence[int]) -> float:
    """Percentage of scheduled grid instants holding a valid sample."""
    if len(expected_schedule) == 0:
        raise ValueError("expected schedule is empty")
    have = {s.timestamp for s in series.samples if s.valid}
    hit = sum(1 for t in expected_schedule if t in have)
    return 100.0 * hit / len(expected_schedule)


def unitwise_average(
    fleet: Sequence[Series], min_units: int = 3, device_id: str = "unitwise"
) -> Series:
    """Average a device fleet per grid timestamp.

    Channels are averaged over units reporting a valid value; a channel (and
    the timestamp, if no channel survives) is omitted when fewer than
    ``min_units`` units contribute.
    """
    if not fleet:
        raise ValueError("fleet is empty")
    if min_units < 1:
        raise ValueError("min_units must be >= 1")
    interval = fleet[0].interval
    phases = {s.phase() for s in fleet if s.phase() is not None}
    if any(s.interval != interval for s in fleet) or len(phases) > 1:
        raise ConfigurationError("fleet series must share interval and grid phase")

    maps = [series.by_timestamp() for series in fleet]
    all_timestamps = sorted(set().union(*[set(m) for m in maps]))
    out = []
    for t in all_timestamps:
        reporters = [m[t] for m in maps if t in m and m[t].valid]
        means: dict[str, float | None] = {}
        emitted = False
        for name in CHANNELS:
            values = [getattr(s, name) for s in reporters if getattr(s, name) is not None]
            if len(values) >= min_units:
                means[name] = sum(values) / len(values)
                emitted = True
            else:
                means[name] = None
        if emitted:
            out.append(make_sample(t, **means))
    return Series(device_id, interval, tuple(out))
