"""Scenario files for the synthetic dataset generator.

A scenario is a flat ``key = value`` file describing the truth process, the
meteorology profiles, fog windows, and one or more sensor profiles:

    duration = 1814400
    interval = 60
    start = 2018-02-13T00:00:00Z
    base.level = 35.0
    base.reversion_rate = 1.0e-4
    base.volatility = 0.25
    pm1_fraction = 0.6
    pm10_ratio = 1.6
    rh.mean = 65.0
    rh.amplitude = 18.0
    rh.phase = 0.0
    temp.mean = 18.0
    temp.amplitude = 5.0
    temp.phase = 3.141592653589793
    fog.1 = 2018-02-17T03:00:00Z,2018-02-17T09:00:00Z,120.0
    sensor.wp00.gain = 0.8
    sensor.wp00.offset = 2.0
    sensor.wp00.noise_sd = 1.5
    sensor.wp00.deliquescence_rh = 80.0
    sensor.wp00.hygro_coeff = 0.15
    sensor.wp00.condensation_susceptibility = 1.0
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigurationError
from .io import parse_kv_file, parse_timestamp
from .synthgen import DiurnalProfile, FogEvent, MeanRevertingLevel, SensorProfile, TruthScenario

_SENSOR_FIELDS = (
    "gain", "offset", "noise_sd", "deliquescence_rh", "hygro_coeff",
    "condensation_susceptibility",
)


@dataclass(frozen=True)
class ScenarioSpec:
    scenario: TruthScenario
    sensors: tuple[tuple[str, SensorProfile], ...]


def _float(entries: dict[str, str], key: str, default: float | None = None) -> float:
    text = entries.pop(key, None)
    if text is None:
        if default is None:
            raise ConfigurationError(f"scenario is missing '{key}'")
        return default
    try:
        return float(text)
    except ValueError:
        raise ConfigurationError(f"scenario field '{key}': not a number: {text!r}")


def _instant(text: str, key: str) -> int:
    try:
        return parse_timestamp(text)
    except ValueError:
        raise ConfigurationError(f"scenario field '{key}': bad timestamp {text!r}")


def load_scenario(path: str | Path) -> ScenarioSpec:
    entries = parse_kv_file(path)

    duration = int(_float(entries, "duration"))
    interval = int(_float(entries, "interval"))
    start_text = entries.pop("start", None)
    start = _instant(start_text, "start") if start_text else 0

    try:
        base = MeanRevertingLevel(
            level=_float(entries, "base.level"),
            reversion_rate=_float(entries, "base.reversion_rate"),
            volatility=_float(entries, "base.volatility"),
        )
    except ValueError as exc:
        raise ConfigurationError(f"invalid base process: {exc}")
    pm1_fraction = _float(entries, "pm1_fraction")
    pm10_ratio = _float(entries, "pm10_ratio")
    rh_profile = DiurnalProfile(
        mean=_float(entries, "rh.mean"),
        amplitude=_float(entries, "rh.amplitude", 0.0),
        phase=_float(entries, "rh.phase", 0.0),
    )
    temp_profile = DiurnalProfile(
        mean=_float(entries, "temp.mean"),
        amplitude=_float(entries, "temp.amplitude", 0.0),
        phase=_float(entries, "temp.phase", 0.0),
    )

    fog_events = []
    for key in sorted(k for k in list(entries) if k.startswith("fog.")):
        cells = [cell.strip() for cell in entries.pop(key).split(",")]
        if len(cells) != 3:
            raise ConfigurationError(f"scenario field '{key}': expected start,end,loading")
        try:
            fog_events.append(FogEvent(
                start=_instant(cells[0], key),
                end=_instant(cells[1], key),
                droplet_loading=float(cells[2]),
            ))
        except ValueError as exc:
            raise ConfigurationError(f"scenario field '{key}': {exc}")

    sensor_names = sorted({
        key.split(".", 2)[1] for key in entries if key.startswith("sensor.")
    })
    sensors = []
    for name in sensor_names:
        fields = {}
        for field_name in _SENSOR_FIELDS:
            key = f"sensor.{name}.{field_name}"
            if key in entries:
                fields[field_name] = _float(entries, key)
        try:
            sensors.append((name, SensorProfile(**fields)))
        except ValueError as exc:
            raise ConfigurationError(f"sensor '{name}': {exc}")
    if not sensors:
        raise ConfigurationError("scenario defines no sensor.<name>.* profile")

    if entries:
        raise ConfigurationError(f"unknown scenario key(s): {', '.join(sorted(entries))}")

    try:
        scenario = TruthScenario(
            duration=duration,
            interval=interval,
            base_pm25=base,
            pm1_fraction=pm1_fraction,
            pm10_ratio=pm10_ratio,
            rh_profile=rh_profile,
            temp_profile=temp_profile,
            fog_events=tuple(fog_events),
            start=start,
        )
    except ValueError as exc:
        raise ConfigurationError(f"invalid scenario: {exc}")
    return ScenarioSpec(scenario, tuple(sensors))
