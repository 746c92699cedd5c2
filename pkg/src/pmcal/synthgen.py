"""Seeded generator of synthetic collocated datasets.

Produces a ground-truth scenario (dry concentration plus meteorology, as a
heated-inlet reference would report) and imperfect sensor renderings with
gain/offset error, noise, hygroscopic growth above a deliquescence point, and
condensation (fog) events that leak droplet loading into the coarse channel.
The fog-affected timestamps are returned as side-channel labels so cleansing
recall/precision can be scored against constructed ground truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigurationError
from .timeseries import Sample, Series

SECONDS_PER_DAY = 86400
FOG_RH_FLOOR = 96.0
# Fraction of injected droplet loading that reaches the pm2.5 channel; the
# bulk lands in pm10 because droplets are dominated by coarse diameters.
FOG_PM25_LEAK = 0.1
# RH is capped here inside the growth law so the multiplier stays finite.
GROWTH_RH_CAP = 99.0


@dataclass(frozen=True)
class DiurnalProfile:
    """Sinusoid with a one-day period: mean + amplitude * sin(2*pi*t/day + phase)."""

    mean: float
    amplitude: float
    phase: float = 0.0

    def value(self, timestamp: int) -> float:
        angle = 2.0 * math.pi * (timestamp % SECONDS_PER_DAY) / SECONDS_PER_DAY
        return self.mean + self.amplitude * math.sin(angle + self.phase)


@dataclass(frozen=True)
class FogEvent:
    """Half-open [start, end) window with suspended droplet loading in ug/m^3."""

    start: int
    end: int
    droplet_loading: float

    def __post_init__(self):
        if self.start >= self.end:
            raise ValueError("fog window must satisfy start < end")
        if self.droplet_loading < 0:
            raise ValueError("droplet loading must be non-negative")

    def contains(self, timestamp: int) -> bool:
        return self.start <= timestamp < self.end


@dataclass(frozen=True)
class MeanRevertingLevel:
    """Parameters of the positive base-concentration process.

    The process is mean reverting in log space; ``volatility`` is the
    stationary standard deviation of the log concentration, and the drift is
    chosen so the stationary mean equals ``level`` exactly.
    """

    level: float
    reversion_rate: float  # 1/s
    volatility: float

    def __post_init__(self):
        if self.level <= 0:
            raise ValueError("level must be positive")
        if self.reversion_rate <= 0:
            raise ValueError("reversion rate must be positive")
        if self.volatility < 0:
            raise ValueError("volatility must be non-negative")


@dataclass(frozen=True)
class TruthScenario:
    """Everything needed to generate one deterministic collocated campaign."""

    duration: int
    interval: int
    base_pm25: MeanRevertingLevel
    pm1_fraction: float
    pm10_ratio: float
    rh_profile: DiurnalProfile
    temp_profile: DiurnalProfile
    fog_events: tuple[FogEvent, ...] = ()
    start: int = 0

    def __post_init__(self):
        object.__setattr__(self, "fog_events", tuple(self.fog_events))
        if self.duration <= 0 or self.interval <= 0:
            raise ValueError("duration and interval must be positive")
        if self.duration % self.interval != 0:
            raise ValueError("duration must be a multiple of the interval")
        if not (0.0 < self.pm1_fraction <= 1.0):
            raise ValueError("pm1 fraction must lie in (0, 1]")
        if self.pm10_ratio < 1.0:
            raise ValueError("pm10 ratio must be >= 1")

    def grid(self) -> np.ndarray:
        n = self.duration // self.interval
        return self.start + self.interval * np.arange(n, dtype=np.int64)

    def in_fog(self, timestamp: int) -> bool:
        return any(event.contains(timestamp) for event in self.fog_events)


@dataclass(frozen=True)
class SensorProfile:
    """Imperfections of one rendered sensor."""

    gain: float = 1.0
    offset: float = 0.0
    noise_sd: float = 0.0
    deliquescence_rh: float = 80.0
    hygro_coeff: float = 0.0
    condensation_susceptibility: float = 0.0

    def __post_init__(self):
        if self.gain <= 0:
            raise ValueError("gain must be positive")
        if self.noise_sd < 0 or self.hygro_coeff < 0 or self.condensation_susceptibility < 0:
            raise ValueError("noise, hygro coefficient and susceptibility must be >= 0")
        if not (0.0 < self.deliquescence_rh < 100.0):
            raise ValueError("deliquescence RH must lie in (0, 100)")
        for name in ("gain", "offset", "noise_sd", "hygro_coeff"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


def growth_multiplier(rh: float, profile: SensorProfile) -> float:
    """Hygroscopic mass multiplier; 1 below the deliquescence point."""
    if rh < profile.deliquescence_rh:
        return 1.0
    capped = min(rh, GROWTH_RH_CAP)
    return 1.0 + profile.hygro_coeff * capped / (100.0 - capped)


def generate_truth(scenario: TruthScenario, seed: int) -> tuple[Series, Series]:
    """Generate the dry reference series and the meteorology series.

    The reference carries the true (dry) pm2.5 plus its fixed-proportion pm1
    and pm10 companions; fog windows drive RH to saturation but leave the
    reference concentrations untouched.
    """
    rng = np.random.default_rng(seed)
    timestamps = scenario.grid()
    n = timestamps.size

    base = scenario.base_pm25
    sigma = base.volatility
    mu = math.log(base.level) - 0.5 * sigma * sigma
    phi = math.exp(-base.reversion_rate * scenario.interval)
    log_c = np.empty(n)
    shocks = rng.standard_normal(n)
    log_c[0] = mu + sigma * shocks[0]
    step_sd = sigma * math.sqrt(max(0.0, 1.0 - phi * phi))
    for k in range(1, n):
        log_c[k] = mu + phi * (log_c[k - 1] - mu) + step_sd * shocks[k]
    pm25 = np.exp(log_c)

    ref_samples = []
    met_samples = []
    for t, c in zip(timestamps, pm25):
        t = int(t)
        c = float(c)
        rh = min(100.0, max(0.0, scenario.rh_profile.value(t)))
        if scenario.in_fog(t):
            rh = max(rh, FOG_RH_FLOOR)
        temp = scenario.temp_profile.value(t)
        ref_samples.append(
            Sample(
                timestamp=t,
                pm1=scenario.pm1_fraction * c,
                pm25=c,
                pm10=scenario.pm10_ratio * c,
            )
        )
        met_samples.append(Sample(timestamp=t, rh=rh, temp=temp))

    reference = Series("truth", scenario.interval, tuple(ref_samples))
    met = Series("met", scenario.interval, tuple(met_samples))
    return reference, met


def simulate_sensor(
    truth: Series,
    met: Series,
    profile: SensorProfile,
    scenario_fog: Sequence[FogEvent],
    seed: int,
    device_id: str = "sensor",
) -> tuple[Series, tuple[int, ...]]:
    """Render an imperfect sensor over the truth grid.

    Returns the sensor series and the timestamps that actually received a
    droplet injection (the ground-truth labels for cleansing efficacy).
    Channel ordering pm1 <= pm25 <= pm10 is enforced after noise.
    """
    if truth.interval != met.interval or truth.timestamps != met.timestamps:
        raise ConfigurationError("truth and met series must share the same grid")
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, profile.noise_sd, size=(len(truth), 3)) if profile.noise_sd > 0 else np.zeros((len(truth), 3))

    fog_events = tuple(scenario_fog)
    samples = []
    labels = []
    for k, (truth_sample, met_sample) in enumerate(zip(truth.samples, met.samples)):
        t = truth_sample.timestamp
        if truth_sample.pm1 is None or truth_sample.pm25 is None or truth_sample.pm10 is None:
            raise ValueError(f"truth sample at {t} is missing a PM channel")
        if met_sample.rh is None:
            raise ValueError(f"met sample at {t} is missing rh")

        dry = [
            max(0.0, profile.gain * true + profile.offset + noise[k, j])
            for j, true in enumerate((truth_sample.pm1, truth_sample.pm25, truth_sample.pm10))
        ]
        g = growth_multiplier(met_sample.rh, profile)
        pm1, pm25, pm10 = (g * v for v in dry)

        injected = 0.0
        for event in fog_events:
            if event.contains(t):
                injected += event.droplet_loading * profile.condensation_susceptibility
        if injected > 0.0:
            pm10 += injected
            pm25 += FOG_PM25_LEAK * injected
            labels.append(t)

        pm1 = min(pm1, pm25)
        pm10 = max(pm10, pm25)
        samples.append(Sample(timestamp=t, pm1=pm1, pm25=pm25, pm10=pm10))

    return Series(device_id, truth.interval, tuple(samples)), tuple(labels)
