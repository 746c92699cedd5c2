"""File formats: the sensor CSV, masks, fog labels, and flat key-value files.

The CSV format is fixed so files diff cleanly and round-trip exactly:
header ``timestamp,pm1,pm25,pm10,temp,rh`` with an optional trailing ``adc``
column, ISO 8601 UTC timestamps (``YYYY-MM-DDTHH:MM:SSZ``), empty fields for
missing values, decimal points without thousands separators, UTF-8, LF line
endings.  Floats are written with ``repr`` so every value re-parses bit-exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ConfigurationError
from .timeseries import CHANNELS, IntervalMask, Sample, Series, channel_violations

CSV_HEADER = ("timestamp", "pm1", "pm25", "pm10", "temp", "rh")
TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M:%SZ"


def parse_timestamp(text: str) -> int:
    """ISO 8601 UTC instant -> integer epoch seconds."""
    moment = datetime.strptime(text, TIMESTAMP_FORMAT).replace(tzinfo=timezone.utc)
    return int(moment.timestamp())


def format_timestamp(timestamp: int) -> str:
    return datetime.fromtimestamp(timestamp, tz=timezone.utc).strftime(TIMESTAMP_FORMAT)


def format_value(value: float | None) -> str:
    return "" if value is None else repr(float(value))


@dataclass(frozen=True)
class Diagnostic:
    """One validation finding; severity is 'error' or 'warning'."""

    path: str
    line: int
    severity: str
    message: str

    def render(self) -> str:
        return f"{self.path}:{self.line}: {self.severity}: {self.message}"


@dataclass(frozen=True)
class IngestResult:
    series: Series
    diagnostics: tuple[Diagnostic, ...]
    n_rows: int
    n_corrupted: int

    @property
    def row_completeness(self) -> float:
        """Percentage of data rows that parsed into valid samples."""
        if self.n_rows == 0:
            return 0.0
        return 100.0 * (self.n_rows - self.n_corrupted) / self.n_rows

    @property
    def has_errors(self) -> bool:
        return any(d.severity == "error" for d in self.diagnostics)


def _parse_field(text: str) -> float | None:
    text = text.strip()
    if not text:
        return None
    return float(text)


def _infer_interval(timestamps: Sequence[int]) -> int:
    gaps = [b - a for a, b in zip(timestamps, timestamps[1:])]
    interval = 0
    for gap in gaps:
        interval = math.gcd(interval, gap)
    return interval


def read_series_csv(
    path: str | Path,
    device_id: str | None = None,
    interval: int | None = None,
) -> IngestResult:
    """Parse and validate a sensor CSV.

    Malformed rows are reported with their line numbers and either skipped
    (unusable timestamp, wrong field count, out of order) or kept as invalid
    samples (parseable but invariant-breaking values).  Only an invalid
    header rejects the file.  The grid interval is inferred as the GCD of the
    timestamp gaps unless given explicitly.
    """
    path = Path(path)
    diagnostics: list[Diagnostic] = []
    rows: list[tuple[int, int, list[float | None]]] = []  # (line, timestamp, fields)
    has_adc = False

    with path.open("r", encoding="utf-8", newline="") as handle:
        lines = handle.read().splitlines()
    if not lines:
        raise ConfigurationError(f"{path}: file is empty (missing header)")
    header = tuple(cell.strip() for cell in lines[0].split(","))
    if header == CSV_HEADER + ("adc",):
        has_adc = True
    elif header != CSV_HEADER:
        raise ConfigurationError(
            f"{path}: invalid header {','.join(header)!r}; "
            f"expected {','.join(CSV_HEADER)}[,adc]"
        )
    n_columns = len(CSV_HEADER) + (1 if has_adc else 0)

    n_rows = 0
    last_timestamp: int | None = None
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        n_rows += 1
        cells = line.split(",")
        if len(cells) != n_columns:
            diagnostics.append(Diagnostic(
                str(path), line_no, "warning",
                f"expected {n_columns} fields, found {len(cells)}; row skipped",
            ))
            continue
        try:
            timestamp = parse_timestamp(cells[0].strip())
        except ValueError:
            diagnostics.append(Diagnostic(
                str(path), line_no, "warning",
                f"unparseable timestamp {cells[0]!r}; row skipped",
            ))
            continue
        if last_timestamp is not None and timestamp <= last_timestamp:
            diagnostics.append(Diagnostic(
                str(path), line_no, "warning",
                "timestamp does not increase; row skipped",
            ))
            continue
        try:
            fields = [_parse_field(cell) for cell in cells[1:]]
        except ValueError as exc:
            diagnostics.append(Diagnostic(
                str(path), line_no, "warning", f"unparseable value: {exc}; row skipped",
            ))
            continue
        last_timestamp = timestamp
        rows.append((line_no, timestamp, fields))

    timestamps = [t for _, t, _ in rows]
    if interval is None:
        inferred = _infer_interval(timestamps)
        if inferred <= 0:
            inferred = 60
            if len(rows) > 1:
                diagnostics.append(Diagnostic(
                    str(path), 1, "warning",
                    "could not infer a grid interval; defaulting to 60 s",
                ))
        interval = inferred
    elif rows:
        # With an explicit interval, rows off the first row's grid are unusable.
        phase = rows[0][1] % interval
        off_grid = [row for row in rows if row[1] % interval != phase]
        for line_no, _, _ in off_grid:
            diagnostics.append(Diagnostic(
                str(path), line_no, "warning",
                f"timestamp off the {interval} s grid; row skipped",
            ))
        rows = [row for row in rows if row[1] % interval == phase]

    samples = []
    n_corrupted = 0
    for line_no, timestamp, fields in rows:
        named = dict(zip(("pm1", "pm25", "pm10", "temp", "rh"), fields))
        named["adc"] = fields[5] if has_adc else None
        problems = channel_violations(**{name: named.get(name) for name in CHANNELS})
        if problems:
            n_corrupted += 1
            diagnostics.append(Diagnostic(
                str(path), line_no, "warning",
                "row marked invalid: " + "; ".join(problems),
            ))
            samples.append(Sample(timestamp=timestamp, valid=False, **named))
        else:
            samples.append(Sample(timestamp=timestamp, valid=True, **named))

    series = Series(device_id or path.stem, interval, tuple(samples))
    return IngestResult(series, tuple(diagnostics), n_rows, n_corrupted)


def write_series_csv(path: str | Path, series: Series) -> None:
    """Write a series in the fixed CSV format (adc column only when present)."""
    has_adc = any(s.adc is not None for s in series.samples)
    header = CSV_HEADER + (("adc",) if has_adc else ())
    lines = [",".join(header)]
    for sample in series.samples:
        cells = [format_timestamp(sample.timestamp)]
        cells += [format_value(getattr(sample, name)) for name in CSV_HEADER[1:]]
        if has_adc:
            cells.append(format_value(sample.adc))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_mask_csv(path: str | Path) -> IntervalMask:
    """Masks are CSV with header ``start,end`` holding ISO UTC instants."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or tuple(c.strip() for c in lines[0].split(",")) != ("start", "end"):
        raise ConfigurationError(f"{path}: mask header must be 'start,end'")
    windows = []
    for line in lines[1:]:
        if not line.strip():
            continue
        start_text, end_text = (cell.strip() for cell in line.split(","))
        windows.append((parse_timestamp(start_text), parse_timestamp(end_text)))
    return IntervalMask(tuple(windows))


def write_labels_csv(path: str | Path, timestamps: Iterable[int]) -> None:
    """Ground-truth labels: one row per fog-affected timestamp."""
    lines = ["timestamp,fog_flag"]
    lines += [f"{format_timestamp(t)},1" for t in timestamps]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_labels_csv(path: str | Path) -> tuple[int, ...]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != "timestamp,fog_flag":
        raise ConfigurationError(f"{path}: label header must be 'timestamp,fog_flag'")
    out = []
    for line in lines[1:]:
        if not line.strip():
            continue
        cells = line.split(",")
        if cells[1].strip() == "1":
            out.append(parse_timestamp(cells[0].strip()))
    return tuple(out)


def parse_kv_file(path: str | Path) -> dict[str, str]:
    """Flat ``key = value`` file with ``#`` comments; later keys win."""
    entries: dict[str, str] = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigurationError(f"{path}:{line_no}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        entries[key.strip()] = value.strip()
    return entries
