"""Pipeline configuration and run orchestration.

``run_pipeline`` executes, per candidate: ingest, preprocessing (last-valid
repair, interval averaging, masking), ratio-gate cleansing, collocated
alignment, model fitting, metric evaluation, and report/plot emission.  With
two or more candidates a unit-wise fleet pass is added.  All artifacts are
staged in a temporary directory and moved into place only on success, so a
failing stage leaves nothing partial behind.
"""

from __future__ import annotations

import shutil
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import plots
from .calibrate import FittedModel, ModelKind, fit, model_to_text, predict, prediction_bounds
from .cleanse import CleanseConfig, cleanse_series, init_window, warmup_rows_from_series
from .errors import ConfigurationError, StageError, UnsupportedModelError
from .evaluate import (
    DEFAULT_FLOOR,
    DEFAULT_LOD_FACTOR,
    DEFAULT_RH_MAX,
    EvaluationReport,
    FleetInputs,
    LodInputs,
    REPORT_CSV_COLUMNS,
    evaluate,
    report_csv_row,
    report_text,
)
from .io import (
    format_timestamp,
    format_value,
    parse_kv_file,
    read_mask_csv,
    read_series_csv,
    write_series_csv,
)
from .timeseries import (
    CollocatedPairs,
    IntervalMask,
    Series,
    align_collocated,
    apply_mask,
    average_interval,
    repair_last_valid,
    unitwise_average,
)

FLEET_ID = "fleet"


def _parse_bool(text: str, key: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise ConfigurationError(f"{key}: expected true/false, got {text!r}")


@dataclass(frozen=True)
class PipelineConfig:
    """Validated run configuration (see README for the file syntax)."""

    candidates: tuple[tuple[str, Path], ...]
    reference: Path
    met: Path | None
    mask: Path | None
    average_interval: int | None
    repair: bool
    cleanse_enabled: bool
    cleanse: CleanseConfig
    fallback_ratio: float
    warmup: int
    models: tuple[ModelKind, ...]
    floor: float
    rh_max: float
    ref_max: float
    lod_factor: float
    r_threshold: float
    min_units: int
    clamp_negative: bool
    out_dir: Path | None

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        base = Path(path).parent
        entries = parse_kv_file(path)
        return cls.from_mapping(entries, base=base)

    @classmethod
    def from_mapping(cls, entries: Mapping[str, str], base: Path = Path(".")) -> "PipelineConfig":
        entries = dict(entries)

        def take(key: str, default: str | None = None) -> str | None:
            return entries.pop(key, default)

        candidates = []
        for key in sorted(k for k in entries if k.startswith("input.candidate.")):
            name = key[len("input.candidate."):]
            candidates.append((name, base / entries.pop(key)))
        if not candidates:
            raise ConfigurationError("config names no input.candidate.<name> entries")

        reference = take("input.reference")
        if reference is None:
            raise ConfigurationError("config is missing input.reference")
        met = take("input.met")
        mask = take("input.mask")

        avg = take("preprocess.average_interval")
        out_text = take("output.dir")
        models_text = take("calibrate.models", "OLS")
        try:
            models = tuple(ModelKind(token.strip()) for token in models_text.split(",") if token.strip())
        except ValueError as exc:
            raise ConfigurationError(f"calibrate.models: {exc}")
        if not models:
            raise ConfigurationError("calibrate.models names no model kinds")

        try:
            config = cls(
                candidates=tuple(candidates),
                reference=base / reference,
                met=base / met if met else None,
                mask=base / mask if mask else None,
                average_interval=int(avg) if avg else None,
                repair=_parse_bool(take("preprocess.repair", "true"), "preprocess.repair"),
                cleanse_enabled=_parse_bool(take("cleanse.enabled", "true"), "cleanse.enabled"),
                cleanse=CleanseConfig(
                    beta=float(take("cleanse.beta", "2.5")),
                    c_low=float(take("cleanse.c_low", "20.0")),
                    h_low=float(take("cleanse.h_low", "80.0")),
                    window_size=int(take("cleanse.window_size", "30")),
                ),
                fallback_ratio=float(take("cleanse.fallback_ratio", "3.0")),
                warmup=int(take("cleanse.warmup", "360")),
                models=models,
                floor=float(take("evaluate.floor", str(DEFAULT_FLOOR))),
                rh_max=float(take("evaluate.rh_max", str(DEFAULT_RH_MAX))),
                ref_max=float(take("evaluate.ref_max", str(DEFAULT_FLOOR))),
                lod_factor=float(take("evaluate.k", str(DEFAULT_LOD_FACTOR))),
                r_threshold=float(take("evaluate.r_threshold", "0.93")),
                min_units=int(take("evaluate.min_units", "3")),
                clamp_negative=_parse_bool(take("report.clamp_negative", "false"), "report.clamp_negative"),
                out_dir=base / out_text if out_text else None,
            )
        except ValueError as exc:
            raise ConfigurationError(f"bad config value: {exc}")
        if entries:
            raise ConfigurationError(f"unknown config key(s): {', '.join(sorted(entries))}")
        return config


@dataclass
class _CandidateArtifacts:
    name: str
    cleansed: Series
    rejected: tuple[int, ...]
    audit: tuple
    pairs: CollocatedPairs
    reports: dict[ModelKind, EvaluationReport] = field(default_factory=dict)
    models: dict[ModelKind, FittedModel] = field(default_factory=dict)


def _preprocess(series: Series, config: PipelineConfig, mask: IntervalMask | None) -> Series:
    if config.repair:
        series, _, _ = repair_last_valid(series)
    if config.average_interval is not None:
        series, _ = average_interval(series, config.average_interval)
    if mask is not None:
        series, _ = apply_mask(series, mask)
    return series


def run_pipeline(config: PipelineConfig, out_dir: Path) -> Path:
    """Execute the full pipeline and write the artifact tree to ``out_dir``.

    The output directory must not already exist.  Any stage failure removes
    the partially staged artifacts and re-raises as StageError.
    """
    out_dir = Path(out_dir)
    if out_dir.exists():
        raise ConfigurationError(f"output directory {out_dir} already exists")
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".pmcal-stage-", dir=out_dir.parent))
    try:
        _run_into(config, staging)
        staging.replace(out_dir)
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    return out_dir


def _stage(name: str):
    class _Context:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc is not None and not isinstance(exc, StageError):
                raise StageError(name, exc) from exc
            return False

    return _Context()


def _run_into(config: PipelineConfig, out: Path) -> None:
    with _stage("ingest"):
        reference_raw = read_series_csv(config.reference, device_id="reference").series
        met_raw = (
            read_series_csv(config.met, device_id="met").series
            if config.met is not None
            else reference_raw
        )
        mask = read_mask_csv(config.mask) if config.mask is not None else None
        candidates_raw = {
            name: read_series_csv(path, device_id=name).series
            for name, path in config.candidates
        }

    covariates = sorted(set().union(*[set(kind.covariates) for kind in config.models]) | {"rh"})
    with _stage("preprocess"):
        reference = _preprocess(reference_raw, config, mask)
        met = _preprocess(met_raw, config, mask)
        candidates = {
            name: _preprocess(series, config, mask)
            for name, series in candidates_raw.items()
        }
        schedule = [s.timestamp for s in reference.samples if s.valid]
        for name in covariates:
            if not any(getattr(s, name) is not None for s in met.samples if s.valid):
                raise ConfigurationError(
                    f"requested models need covariate column '{name}', "
                    "but the covariate source series never provides it"
                )

    processed: list[_CandidateArtifacts] = []
    for name, series in candidates.items():
        processed.append(_run_candidate(name, series, reference, met, config, covariates, out, schedule))

    # The fleet pass needs enough units for the per-timestamp minimum to be
    # satisfiable at all; with fewer candidates it is skipped.
    if len(candidates) >= max(2, config.min_units):
        with _stage("fleet"):
            cleansed_units = [artifact.cleansed for artifact in processed]
            fleet_series = unitwise_average(cleansed_units, config.min_units, device_id=FLEET_ID)
            fleet_sets: dict[int, list[float]] = {}
            for unit in cleansed_units:
                for sample in unit.samples:
                    if sample.valid and sample.pm25 is not None:
                        fleet_sets.setdefault(sample.timestamp, []).append(sample.pm25)
            fleet_inputs = FleetInputs(fleet_sets, reference, min_units=config.min_units)
        processed.append(
            _run_candidate(
                FLEET_ID, fleet_series, reference, met, config, covariates, out, schedule,
                fleet_inputs=fleet_inputs, already_cleansed=True,
            )
        )

    with _stage("report"):
        header = ["candidate", "model", *REPORT_CSV_COLUMNS]
        lines = [",".join(header)]
        for artifact in processed:
            for kind in config.models:
                report = artifact.reports.get(kind)
                if report is None:
                    continue
                lines.append(",".join([artifact.name, kind.value, *report_csv_row(report)]))
        (out / "report.csv").write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def _run_candidate(
    name: str,
    series: Series,
    reference: Series,
    met: Series,
    config: PipelineConfig,
    covariates: Sequence[str],
    out: Path,
    schedule: Sequence[int],
    fleet_inputs: FleetInputs | None = None,
    already_cleansed: bool = False,
) -> _CandidateArtifacts:
    candidate_dir = out / name
    candidate_dir.mkdir(parents=True, exist_ok=True)

    with _stage("cleanse"):
        if config.cleanse_enabled and not already_cleansed:
            warmup = warmup_rows_from_series(series, met, config.warmup)
            window = init_window(warmup, config.cleanse, config.fallback_ratio)
            result = cleanse_series(series, met, config.cleanse, window)
            cleansed, rejected, audit = result.cleansed, result.rejected_timestamps, result.audit
        else:
            cleansed, rejected, audit = series, (), ()
        write_series_csv(candidate_dir / "cleansed.csv", cleansed)
        _write_audit(candidate_dir / "rejections.csv", audit)

    with _stage("align"):
        pairs = align_collocated(
            cleansed, reference, covariate_source=met, covariates=tuple(covariates)
        )

    artifact = _CandidateArtifacts(name, cleansed, rejected, audit, pairs)
    models_dir = candidate_dir / "models"
    models_dir.mkdir(exist_ok=True)
    plots_dir = candidate_dir / "plots"
    plots_dir.mkdir(exist_ok=True)
    _write_pairs(plots_dir / "scatter.csv", pairs)

    for kind in config.models:
        with _stage(f"calibrate[{name}/{kind.value}]"):
            model = fit(kind, pairs)
            artifact.models[kind] = model
            (models_dir / f"{kind.value}.txt").write_text(
                model_to_text(model), encoding="utf-8", newline="\n"
            )

        with _stage(f"evaluate[{name}/{kind.value}]"):
            calibrated = np.asarray(
                predict(model, pairs.x, rh=pairs.rh, temp=pairs.temp), dtype=float
            )
            if config.clamp_negative:
                calibrated = np.maximum(calibrated, 0.0)
            calibrated_pairs = CollocatedPairs(
                timestamps=pairs.timestamps, x=calibrated, y=pairs.y,
                rh=pairs.rh, temp=pairs.temp,
            )
            lod_inputs = LodInputs(
                calibrated={int(t): float(v) for t, v in zip(pairs.timestamps, calibrated)},
                reference=reference,
                rh=met,
                rh_max=config.rh_max,
                ref_max=config.ref_max,
                k=config.lod_factor,
            )
            report = evaluate(
                calibrated_pairs,
                fleet_inputs=fleet_inputs,
                lod_inputs=lod_inputs,
                schedule=schedule,
                candidate_series=series,
                floor=config.floor,
                r_threshold=config.r_threshold,
            )
            artifact.reports[kind] = report
            (candidate_dir / f"report_{kind.value}.txt").write_text(
                report_text(report), encoding="utf-8", newline="\n"
            )

        with _stage(f"plot[{name}/{kind.value}]"):
            _emit_plot_artifacts(
                plots_dir, name, kind, model, pairs, calibrated, config.floor
            )

    return artifact


def _emit_plot_artifacts(
    plots_dir: Path,
    name: str,
    kind: ModelKind,
    model: FittedModel,
    pairs: CollocatedPairs,
    calibrated: np.ndarray,
    floor: float,
) -> None:
    residuals = calibrated - pairs.y
    keep = (calibrated >= floor) & (pairs.y >= floor)
    rel = 100.0 * (calibrated[keep] - pairs.y[keep]) / pairs.y[keep]
    rh = pairs.rh if pairs.rh is not None else np.zeros(pairs.n)

    rel_by_index = {int(i): v for i, v in zip(np.flatnonzero(keep), rel)}
    _write_plot_csv(
        plots_dir / f"residual_rh_{kind.value}.csv",
        ("timestamp", "rh", "residual", "rel_residual"),
        (
            (
                format_timestamp(int(t)),
                format_value(rh_value),
                format_value(residual),
                format_value(rel_by_index[i]) if i in rel_by_index else "",
            )
            for i, (t, rh_value, residual) in enumerate(zip(pairs.timestamps, rh, residuals))
        ),
    )
    _write_hist_csv(plots_dir / f"residual_hist_{kind.value}.csv", residuals, 1.0)
    _write_hist_csv(plots_dir / f"rel_residual_hist_{kind.value}.csv", rel, 1.0)

    fit_line = None
    bounds = None
    if kind is ModelKind.OLS:
        grid = np.linspace(float(pairs.x.min()), float(pairs.x.max()), 100)
        fit_line = (grid, model.coefficients[0] + model.coefficients[1] * grid)
        try:
            lower, upper = prediction_bounds(model, grid, level=0.95)
            bounds = (grid, lower, upper)
        except (UnsupportedModelError, ValueError):
            bounds = None
    plots.scatter_fit_figure(
        plots_dir / f"scatter_{kind.value}.png",
        pairs.x, pairs.y, pairs.rh,
        f"{name} raw vs reference ({kind.value} fit)",
        fit_line=fit_line,
        bounds=bounds,
    )
    plots.residual_panel_figure(
        plots_dir / f"residuals_{kind.value}.png",
        rh,
        residuals,
        pairs.y,
        rh[keep],
        rel,
        pairs.y[keep],
        f"{name} {kind.value} residuals",
    )


def _write_plot_csv(path: Path, header: Sequence[str], rows) -> None:
    lines = [",".join(header)]
    lines += [",".join(row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def _write_hist_csv(path: Path, values: np.ndarray, width: float) -> None:
    edges = plots.histogram_edges(np.asarray(values, dtype=float), width)
    counts, _ = np.histogram(values, bins=edges)
    rows = (
        (format_value(left), format_value(right), str(int(count)))
        for left, right, count in zip(edges[:-1], edges[1:], counts)
    )
    _write_plot_csv(path, ("bin_left", "bin_right", "count"), rows)


def _write_audit(path: Path, audit) -> None:
    lines = ["timestamp,ratio,window_mean,window_sd,verdict,note"]
    for record in audit:
        lines.append(",".join([
            format_timestamp(record.timestamp),
            format_value(record.ratio),
            format_value(record.window_mean),
            format_value(record.window_sd),
            record.verdict.value,
            record.note or "",
        ]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def _write_pairs(path: Path, pairs: CollocatedPairs) -> None:
    header = ["timestamp", "x", "y"]
    columns = [
        [format_timestamp(int(t)) for t in pairs.timestamps],
        [format_value(v) for v in pairs.x],
        [format_value(v) for v in pairs.y],
    ]
    if pairs.rh is not None:
        header.append("rh")
        columns.append([format_value(v) for v in pairs.rh])
    if pairs.temp is not None:
        header.append("temp")
        columns.append([format_value(v) for v in pairs.temp])
    lines = [",".join(header)]
    lines += [",".join(cells) for cells in zip(*columns)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
