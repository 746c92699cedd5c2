"""Regulatory-style metric suite for collocated candidate/reference pairs.

Covers relative errors with a low-concentration validity floor, the t-based
trueness interval (Bias_PEP), the chi-square upper confidence limit on the
relative-error standard deviation (sigma_UCL, with its sqrt(1/2)-scaled CV
form), fleet unit-wise precision (CV_RMS), slope/intercept/correlation
comparability tests, the limit of detection, and report assembly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .statcore import chi2_quantile, pearson_r, sample_stats, t_quantile
from .timeseries import CollocatedPairs, Series, completeness

BIAS_GOAL_PERCENT = 10.0
PRECISION_GOAL_PERCENT = 10.0
CV_RMS_GOAL_PERCENT = 15.0
SLOPE_GOAL = (0.90, 1.10)
DEFAULT_FLOOR = 3.0
DEFAULT_LOD_FACTOR = 3.30
DEFAULT_RH_MAX = 50.0
FALLBACK_RH_MAX = 80.0
CV_RMS_CONCENTRATION_RANGE = (3.0, 200.0)
LOW_SAMPLE_WARNING_N = 30

# The precision pass flag is judged against sigma_UCL: the quantity is an
# upper confidence limit on a standard deviation of relative errors, so
# reading it as a coefficient of variation mislabels it.  The CV_UCL form is
# reported alongside for comparability with data-quality tables that use it.
PRECISION_FOOTNOTE = (
    "precision pass/fail evaluated against sigma_ucl; "
    "cv_ucl = sigma_ucl * sqrt(1/2) reported alongside"
)
# Trueness requires the whole confidence interval inside the +-10 % goal
# (stricter than testing the center alone).
BIAS_FOOTNOTE = "bias pass/fail requires the entire interval within +-10 %"


@dataclass(frozen=True)
class RelErrorSet:
    """Percent relative errors of pairs where both values reached the floor."""

    values: np.ndarray
    n: int
    floor: float
    n_total: int

    def __post_init__(self):
        if self.n != len(self.values):
            raise ValueError("n must equal the number of retained errors")


@dataclass(frozen=True)
class BiasResult:
    center: float
    half_width: float
    passes: bool
    n: int
    low_sample_warning: bool = False

    def __post_init__(self):
        if self.half_width < 0:
            raise ValueError("half width must be >= 0")


@dataclass(frozen=True)
class PrecisionResult:
    sigma_ucl: float
    cv_ucl: float
    passes: bool
    n: int


@dataclass(frozen=True)
class CvRmsResult:
    cv_rms: float
    passes: bool
    n_sets: int


@dataclass(frozen=True)
class ComparabilityResult:
    slope: float
    intercept: float
    r: float
    slope_pass: bool
    intercept_pass: bool
    r_pass: bool
    r_threshold_used: float
    intercept_bounds: tuple[float, float]


@dataclass(frozen=True)
class LodResult:
    """LOD value is None when too few qualifying low-concentration rows exist."""

    value: float | None
    n_low: int
    rh_max_used: float
    factor: float
    reason: str | None = None


@dataclass(frozen=True)
class EvaluationReport:
    """Assembled metric suite; optional metrics stay absent instead of aborting."""

    n: int
    n_unfiltered: int
    bias: BiasResult | None
    precision: PrecisionResult | None
    comparability: ComparabilityResult | None
    lod: LodResult | None = None
    cv_rms: CvRmsResult | None = None
    completeness_percent: float | None = None
    failures: tuple[tuple[str, str], ...] = ()
    footnotes: tuple[str, ...] = (BIAS_FOOTNOTE, PRECISION_FOOTNOTE)


def relative_errors(pairs: CollocatedPairs, floor: float = DEFAULT_FLOOR) -> RelErrorSet:
    """Percent relative error per pair, keeping rows with both values >= floor."""
    if floor < 0:
        raise ValueError("floor must be >= 0")
    keep = (pairs.x >= floor) & (pairs.y >= floor)
    x, y = pairs.x[keep], pairs.y[keep]
    values = 100.0 * (x - y) / y
    return RelErrorSet(values=values, n=int(keep.sum()), floor=floor, n_total=pairs.n)


def bias_pep(errors: RelErrorSet) -> BiasResult:
    """Mean relative error with a 90 % two-sided t confidence interval.

    Passes when the entire interval [center - hw, center + hw] lies inside
    the +-10 % trueness goal.
    """
    if errors.n < 2:
        raise ValueError("bias needs at least two valid relative errors")
    stats = sample_stats(errors.values)
    assert stats.sd is not None
    half_width = t_quantile(0.95, errors.n - 1) * stats.sd / math.sqrt(errors.n)
    passes = (stats.mean - half_width >= -BIAS_GOAL_PERCENT) and (
        stats.mean + half_width <= BIAS_GOAL_PERCENT
    )
    return BiasResult(
        center=stats.mean,
        half_width=half_width,
        passes=passes,
        n=errors.n,
        low_sample_warning=errors.n < LOW_SAMPLE_WARNING_N,
    )


def sigma_ucl(errors: RelErrorSet) -> PrecisionResult:
    """Upper 90 % confidence limit on the relative-error standard deviation."""
    if errors.n < 2:
        raise ValueError("precision needs at least two valid relative errors")
    stats = sample_stats(errors.values)
    assert stats.sd is not None
    upper = stats.sd * math.sqrt((errors.n - 1) / chi2_quantile(0.1, errors.n - 1))
    return PrecisionResult(
        sigma_ucl=upper,
        cv_ucl=upper * math.sqrt(0.5),
        passes=upper < PRECISION_GOAL_PERCENT,
        n=errors.n,
    )


def cv_rms(
    fleet_sets: Mapping[int, Sequence[float]],
    reference: Series,
    min_units: int = 3,
) -> CvRmsResult:
    """Root mean square of per-timestamp coefficients of variation across units.

    A timestamp counts when the reference concentration lies within the
    3-200 ug/m^3 validity range, at least ``min_units`` units report, and the
    set mean is positive (CV is only meaningful on a ratio scale).
    """
    if min_units < 2:
        raise ValueError("min_units must be >= 2 for a defined CV")
    low, high = CV_RMS_CONCENTRATION_RANGE
    ref_map = {
        s.timestamp: s.pm25 for s in reference.samples if s.valid and s.pm25 is not None
    }
    cv_squares = []
    for timestamp in sorted(fleet_sets):
        values = [float(v) for v in fleet_sets[timestamp]]
        ref = ref_map.get(timestamp)
        if ref is None or not (low <= ref <= high) or len(values) < min_units:
            continue
        stats = sample_stats(values)
        if stats.mean <= 0 or stats.sd is None:
            continue
        cv_squares.append((100.0 * stats.sd / stats.mean) ** 2)
    if not cv_squares:
        raise ValueError("no valid measurement sets for CV_RMS")
    value = math.sqrt(sum(cv_squares) / len(cv_squares))
    return CvRmsResult(cv_rms=value, passes=value <= CV_RMS_GOAL_PERCENT, n_sets=len(cv_squares))


def comparability(pairs: CollocatedPairs, r_threshold: float = 0.93) -> ComparabilityResult:
    """Slope/intercept/correlation tests of candidate against reference.

    The regression runs candidate-on-reference (opposite orientation to the
    calibration fit).  The intercept window is slope dependent:
    [max(-2, 15.05 - slope*17.32), min(2, 15.05 - slope*13.20)] ug/m^3.
    """
    if not (0.93 <= r_threshold <= 0.95):
        raise ValueError("r threshold must lie within [0.93, 0.95]")
    if pairs.n < 3:
        raise ValueError("comparability needs at least three pairs")
    ref = pairs.y
    cand = pairs.x
    ref_centered = ref - ref.mean()
    cand_centered = cand - cand.mean()
    s_rr = float(ref_centered @ ref_centered)
    s_cc = float(cand_centered @ cand_centered)
    if s_rr == 0.0 or s_cc == 0.0:
        raise ValueError("comparability undefined: a column has zero variance")
    slope = float(ref_centered @ cand_centered) / s_rr
    intercept = float(cand.mean() - slope * ref.mean())
    r = pearson_r(ref, cand)

    lower = max(-2.0, 15.05 - slope * 17.32)
    upper = min(2.0, 15.05 - slope * 13.20)
    return ComparabilityResult(
        slope=slope,
        intercept=intercept,
        r=r,
        slope_pass=SLOPE_GOAL[0] <= slope <= SLOPE_GOAL[1],
        intercept_pass=lower <= intercept <= upper,
        r_pass=r >= r_threshold,
        r_threshold_used=r_threshold,
        intercept_bounds=(lower, upper),
    )


def _calibrated_map(calibrated: "Series | Mapping[int, float]") -> Mapping[int, float]:
    if isinstance(calibrated, Series):
        return {
            s.timestamp: s.pm25
            for s in calibrated.samples
            if s.valid and s.pm25 is not None
        }
    return calibrated


def lod(
    calibrated: "Series | Mapping[int, float]",
    reference: Series,
    rh: Series,
    rh_max: float = DEFAULT_RH_MAX,
    ref_max: float = DEFAULT_FLOOR,
    k: float = DEFAULT_LOD_FACTOR,
) -> LodResult:
    """Limit of detection: k times the low-concentration sample's deviation.

    The low sample holds calibrated values at timestamps where the reference
    sits below ``ref_max`` under low RH.  When the default 50 % RH cut yields
    nothing, the cut relaxes to 80 % before giving up.  ``calibrated`` may be
    a series or a plain timestamp-to-value mapping; the mapping form admits
    the negative values a regression can produce at low concentrations, which
    stay in the sample (excluding them would understate the spread).
    """
    if k <= 0:
        raise ValueError("multiplying factor must be positive")
    calibrated_values = _calibrated_map(calibrated)
    ref_map = {
        s.timestamp: s.pm25 for s in reference.samples if s.valid and s.pm25 is not None
    }
    rh_map = {s.timestamp: s.rh for s in rh.samples if s.valid and s.rh is not None}

    def low_sample(cut: float) -> list[float]:
        rows = []
        for timestamp in sorted(calibrated_values):
            ref_value = ref_map.get(timestamp)
            rh_value = rh_map.get(timestamp)
            if ref_value is None or rh_value is None:
                continue
            if ref_value < ref_max and rh_value <= cut:
                rows.append(calibrated_values[timestamp])
        return rows

    rh_max_used = rh_max
    rows = low_sample(rh_max_used)
    if not rows and rh_max == DEFAULT_RH_MAX:
        rh_max_used = FALLBACK_RH_MAX
        rows = low_sample(rh_max_used)
    if len(rows) < 2:
        return LodResult(
            value=None,
            n_low=len(rows),
            rh_max_used=rh_max_used,
            factor=k,
            reason=f"only {len(rows)} qualifying low-concentration rows",
        )
    stats = sample_stats(rows)
    assert stats.sd is not None
    return LodResult(value=k * stats.sd, n_low=len(rows), rh_max_used=rh_max_used, factor=k)


@dataclass(frozen=True)
class LodInputs:
    calibrated: "Series | Mapping[int, float]"
    reference: Series
    rh: Series
    rh_max: float = DEFAULT_RH_MAX
    ref_max: float = DEFAULT_FLOOR
    k: float = DEFAULT_LOD_FACTOR


@dataclass(frozen=True)
class FleetInputs:
    sets: Mapping[int, Sequence[float]]
    reference: Series
    min_units: int = 3


def evaluate(
    pairs: CollocatedPairs,
    fleet_inputs: FleetInputs | None = None,
    lod_inputs: LodInputs | None = None,
    schedule: Sequence[int] | None = None,
    candidate_series: Series | None = None,
    floor: float = DEFAULT_FLOOR,
    r_threshold: float = 0.93,
) -> EvaluationReport:
    """Assemble the full metric suite for one candidate.

    Every numeric field is traceable to exactly one sub-operation; a failing
    sub-operation leaves its field absent (with the reason recorded) rather
    than aborting the report.  Both the floor-filtered and unfiltered pair
    counts are stored.
    """
    if pairs.n == 0:
        raise ValueError("evaluate needs non-empty pairs")
    failures: list[tuple[str, str]] = []

    errors = relative_errors(pairs, floor=floor)

    bias = precision = None
    try:
        bias = bias_pep(errors)
    except ValueError as exc:
        failures.append(("bias", str(exc)))
    try:
        precision = sigma_ucl(errors)
    except ValueError as exc:
        failures.append(("precision", str(exc)))

    comp = None
    try:
        comp = comparability(pairs, r_threshold=r_threshold)
    except ValueError as exc:
        failures.append(("comparability", str(exc)))

    lod_result = None
    if lod_inputs is not None:
        try:
            lod_result = lod(
                lod_inputs.calibrated,
                lod_inputs.reference,
                lod_inputs.rh,
                rh_max=lod_inputs.rh_max,
                ref_max=lod_inputs.ref_max,
                k=lod_inputs.k,
            )
        except ValueError as exc:
            failures.append(("lod", str(exc)))

    cv_result = None
    if fleet_inputs is not None:
        try:
            cv_result = cv_rms(
                fleet_inputs.sets, fleet_inputs.reference, min_units=fleet_inputs.min_units
            )
        except ValueError as exc:
            failures.append(("cv_rms", str(exc)))

    eta = None
    if schedule is not None and candidate_series is not None:
        try:
            eta = completeness(candidate_series, schedule)
        except ValueError as exc:
            failures.append(("completeness", str(exc)))

    return EvaluationReport(
        n=errors.n,
        n_unfiltered=errors.n_total,
        bias=bias,
        precision=precision,
        comparability=comp,
        lod=lod_result,
        cv_rms=cv_result,
        completeness_percent=eta,
        failures=tuple(failures),
    )


REPORT_CSV_COLUMNS = (
    "n", "bias_center", "bias_hw", "sigma_ucl", "cv_ucl", "cv_rms",
    "slope", "intercept", "r", "lod", "eta",
    "bias_pass", "precision_pass", "slope_pass", "intercept_pass", "r_pass",
    "cv_rms_pass",
)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def report_csv_row(report: EvaluationReport) -> list[str]:
    """One report as CSV cells in the fixed column order (empty = absent)."""
    bias, precision, comp = report.bias, report.precision, report.comparability
    return [
        _cell(report.n),
        _cell(bias.center if bias else None),
        _cell(bias.half_width if bias else None),
        _cell(precision.sigma_ucl if precision else None),
        _cell(precision.cv_ucl if precision else None),
        _cell(report.cv_rms.cv_rms if report.cv_rms else None),
        _cell(comp.slope if comp else None),
        _cell(comp.intercept if comp else None),
        _cell(comp.r if comp else None),
        _cell(report.lod.value if report.lod else None),
        _cell(report.completeness_percent),
        _cell(bias.passes if bias else None),
        _cell(precision.passes if precision else None),
        _cell(comp.slope_pass if comp else None),
        _cell(comp.intercept_pass if comp else None),
        _cell(comp.r_pass if comp else None),
        _cell(report.cv_rms.passes if report.cv_rms else None),
    ]


def report_text(report: EvaluationReport) -> str:
    """Flat key-value rendering of a report, one metric per line."""
    lines = [f"n = {report.n}", f"n_unfiltered = {report.n_unfiltered}"]
    if report.bias:
        lines += [
            f"bias_center = {report.bias.center!r}",
            f"bias_half_width = {report.bias.half_width!r}",
            f"bias_pass = {str(report.bias.passes).lower()}",
        ]
        if report.bias.low_sample_warning:
            lines.append("bias_low_sample_warning = true")
    if report.precision:
        lines += [
            f"sigma_ucl = {report.precision.sigma_ucl!r}",
            f"cv_ucl = {report.precision.cv_ucl!r}",
            f"precision_pass = {str(report.precision.passes).lower()}",
        ]
    if report.comparability:
        comp = report.comparability
        lines += [
            f"slope = {comp.slope!r}",
            f"intercept = {comp.intercept!r}",
            f"r = {comp.r!r}",
            f"slope_pass = {str(comp.slope_pass).lower()}",
            f"intercept_pass = {str(comp.intercept_pass).lower()}",
            f"intercept_bounds = [{comp.intercept_bounds[0]!r}, {comp.intercept_bounds[1]!r}]",
            f"r_pass = {str(comp.r_pass).lower()}",
            f"r_threshold = {comp.r_threshold_used!r}",
        ]
    if report.lod:
        if report.lod.value is not None:
            lines.append(f"lod = {report.lod.value!r}")
        else:
            lines.append(f"lod_absent_reason = {report.lod.reason}")
        lines.append(f"lod_n_low = {report.lod.n_low}")
        lines.append(f"lod_rh_max = {report.lod.rh_max_used!r}")
    if report.cv_rms:
        lines += [
            f"cv_rms = {report.cv_rms.cv_rms!r}",
            f"cv_rms_pass = {str(report.cv_rms.passes).lower()}",
        ]
    if report.completeness_percent is not None:
        lines.append(f"eta = {report.completeness_percent!r}")
    for name, reason in report.failures:
        lines.append(f"absent.{name} = {reason}")
    for note in report.footnotes:
        lines.append(f"note = {note}")
    return "\n".join(lines) + "\n"
