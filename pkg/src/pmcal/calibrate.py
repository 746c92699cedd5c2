"""Collocated calibration: closed-form least-squares fits of five model kinds,
coefficient confidence intervals, prediction, OLS prediction bounds, and fleet
calibration with per-device zero offsets.

The reference instrument is the dependent variable; the sensor (plus optional
RH/TEMP covariates) is the regressor side.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import linalg

from .errors import ConfigurationError, SingularDesignError, UnsupportedModelError
from .statcore import t_quantile
from .timeseries import CollocatedPairs


class ModelKind(str, enum.Enum):
    """Calibration model kinds and their regressor sets.

    OLS: sensor only; MLH: + RH; MLT: + TEMP; MLHT: + RH + TEMP;
    ADV: + RH and the sensor*RH interaction.
    """

    OLS = "OLS"
    MLH = "MLH"
    MLT = "MLT"
    MLHT = "MLHT"
    ADV = "ADV"

    @property
    def covariates(self) -> tuple[str, ...]:
        return {
            ModelKind.OLS: (),
            ModelKind.MLH: ("rh",),
            ModelKind.MLT: ("temp",),
            ModelKind.MLHT: ("rh", "temp"),
            ModelKind.ADV: ("rh",),
        }[self]

    @property
    def regressor_names(self) -> tuple[str, ...]:
        return {
            ModelKind.OLS: ("x",),
            ModelKind.MLH: ("x", "rh"),
            ModelKind.MLT: ("x", "temp"),
            ModelKind.MLHT: ("x", "rh", "temp"),
            ModelKind.ADV: ("x", "rh", "x*rh"),
        }[self]

    def regressors(self, x, rh=None, temp=None) -> list:
        """Regressor columns (or scalars) in coefficient order, intercept excluded."""
        missing = [
            name for name, value in (("rh", rh), ("temp", temp))
            if name in self.covariates and value is None
        ]
        if missing:
            raise ConfigurationError(
                f"model {self.value} requires covariate column(s): {', '.join(missing)}"
            )
        if self is ModelKind.OLS:
            return [x]
        if self is ModelKind.MLH:
            return [x, rh]
        if self is ModelKind.MLT:
            return [x, temp]
        if self is ModelKind.MLHT:
            return [x, rh, temp]
        return [x, rh, x * rh]


ModelSpec = ModelKind  # alias: a fit is fully specified by its kind


@dataclass(frozen=True)
class FittedModel:
    """Least-squares fit: coefficients (intercept first) with 95% half-widths.

    ``x_mean``/``x_sumsq`` hold the regressor statistics needed for OLS
    prediction bounds; they are None for multi-regressor kinds.  Residual
    diagnostics are reported, never enforced.
    """

    kind: ModelKind
    n: int
    coefficients: tuple[float, ...]
    half_widths: tuple[float, ...]
    r_squared: float
    residual_sd: float
    x_mean: float | None = None
    x_sumsq: float | None = None
    residual_mean: float = 0.0
    residual_lag1_autocorr: float | None = None

    def __post_init__(self):
        expected = len(self.kind.regressor_names) + 1
        if len(self.coefficients) != expected or len(self.half_widths) != expected:
            raise ValueError(
                f"{self.kind.value} carries {expected} coefficients, "
                f"got {len(self.coefficients)}"
            )
        if self.n <= expected:
            raise ValueError("n must exceed the coefficient count")


def _design_matrix(kind: ModelKind, pairs: CollocatedPairs) -> np.ndarray:
    columns = kind.regressors(pairs.x, rh=pairs.rh, temp=pairs.temp)
    return np.column_stack([np.ones(pairs.n)] + columns)


def fit(kind: ModelKind, pairs: CollocatedPairs) -> FittedModel:
    """Fit the normal equations via a pivoted QR decomposition.

    Rank deficiency (for example a constant sensor column) raises
    SingularDesignError rather than returning garbage coefficients.
    """
    design = _design_matrix(kind, pairs)
    y = np.asarray(pairs.y, dtype=float)
    n, p = design.shape
    if n < p + 2:
        raise ValueError(f"{kind.value} fit needs at least {p + 2} rows, got {n}")

    q, r, perm = linalg.qr(design, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = diag.max() * max(n, p) * np.finfo(float).eps if diag.size else 0.0
    if diag.min() <= tol:
        raise SingularDesignError(
            f"design matrix for {kind.value} is rank deficient (singular column set)"
        )

    beta_perm = linalg.solve_triangular(r, q.T @ y)
    beta = np.empty(p)
    beta[perm] = beta_perm

    residuals = y - design @ beta
    sse = float(residuals @ residuals)
    sst = float(np.sum((y - y.mean()) ** 2))
    dof = n - p
    residual_sd = math.sqrt(sse / dof)
    r_squared = 1.0 - sse / sst if sst > 0 else 1.0

    # Unscaled covariance (X'X)^-1 from the R factor, undoing the pivoting.
    r_inv = linalg.solve_triangular(r, np.eye(p))
    cov_perm = r_inv @ r_inv.T
    cov = np.empty((p, p))
    cov[np.ix_(perm, perm)] = cov_perm
    t_crit = t_quantile(0.975, dof)
    half_widths = t_crit * residual_sd * np.sqrt(np.diag(cov))

    lag1 = None
    if n >= 3 and sse > 0:
        lag1 = float(residuals[1:] @ residuals[:-1]) / sse

    x = np.asarray(pairs.x, dtype=float)
    return FittedModel(
        kind=kind,
        n=n,
        coefficients=tuple(float(b) for b in beta),
        half_widths=tuple(float(h) for h in half_widths),
        r_squared=float(r_squared),
        residual_sd=float(residual_sd),
        x_mean=float(x.mean()) if kind is ModelKind.OLS else None,
        x_sumsq=float(np.sum((x - x.mean()) ** 2)) if kind is ModelKind.OLS else None,
        residual_mean=float(residuals.mean()),
        residual_lag1_autocorr=lag1,
    )


def predict(model, x, rh=None, temp=None):
    """Evaluate a fitted (or personalized) model; works on scalars and arrays.

    Predictions are raw model output and may be negative; clamping is a
    report-time option, never applied here.
    """
    kind = ModelKind(model.kind)
    terms = kind.regressors(x, rh=rh, temp=temp)
    result = model.coefficients[0]
    for coefficient, term in zip(model.coefficients[1:], terms):
        result = result + coefficient * term
    return result


def prediction_bounds(
    model: FittedModel, x_grid: Sequence[float], level: float = 0.95
) -> tuple[np.ndarray, np.ndarray]:
    """Two-sided prediction interval around the OLS line over a grid."""
    if model.kind is not ModelKind.OLS:
        raise UnsupportedModelError("prediction bounds are defined for OLS fits only")
    if not (0.0 < level < 1.0):
        raise ValueError("level must lie in (0, 1)")
    if model.x_sumsq is None or model.x_mean is None or model.x_sumsq <= 0:
        raise ValueError("model lacks the regressor statistics for bounds")
    grid = np.asarray(x_grid, dtype=float)
    fitted = model.coefficients[0] + model.coefficients[1] * grid
    t_crit = t_quantile(0.5 + level / 2.0, model.n - 2)
    spread = model.residual_sd * np.sqrt(
        1.0 + 1.0 / model.n + (grid - model.x_mean) ** 2 / model.x_sumsq
    )
    margin = t_crit * spread
    return fitted - margin, fitted + margin


@dataclass(frozen=True)
class DeviceCalibration:
    """Per-device model: shared slopes, personalized zero-offset intercept."""

    device_id: str
    kind: ModelKind
    coefficients: tuple[float, ...]


def fleet_calibrate(
    unitwise_model: FittedModel,
    device_zero_samples: Mapping[str, Sequence[float]],
    zero_air_covariates: Mapping[str, float] | None = None,
) -> dict[str, DeviceCalibration]:
    """Personalize a fleet-average model per device via zero calibration.

    Every non-intercept coefficient is copied from the unit-wise model; the
    intercept is chosen so the device's mean clean-air reading maps to zero
    under its personalized model.  Models with RH/TEMP terms need the
    covariate values representing clean air supplied explicitly.
    """
    kind = unitwise_model.kind
    covariates = dict(zero_air_covariates or {})
    missing = [name for name in kind.covariates if name not in covariates]
    if missing:
        raise ConfigurationError(
            f"zero-air covariate value(s) required for {kind.value}: {', '.join(missing)}"
        )
    result: dict[str, DeviceCalibration] = {}
    for device_id, samples in device_zero_samples.items():
        values = [float(v) for v in samples]
        if not values:
            raise ValueError(f"device '{device_id}' supplied no zero-calibration samples")
        zero_mean = sum(values) / len(values)
        terms = kind.regressors(
            zero_mean, rh=covariates.get("rh"), temp=covariates.get("temp")
        )
        intercept = -sum(
            coefficient * term
            for coefficient, term in zip(unitwise_model.coefficients[1:], terms)
        )
        coefficients = (intercept,) + tuple(unitwise_model.coefficients[1:])
        result[device_id] = DeviceCalibration(device_id, kind, coefficients)
    return result


def model_to_text(model: FittedModel) -> str:
    """Serialize a fit as a flat key-value block, round-trip exact."""
    def fmt(value: float) -> str:
        return format(value, ".17g")

    lines = [
        f"kind = {model.kind.value}",
        f"n = {model.n}",
    ]
    names = ("intercept",) + model.kind.regressor_names
    for name, coefficient, half_width in zip(names, model.coefficients, model.half_widths):
        lines.append(f"coefficient.{name} = {fmt(coefficient)}")
        lines.append(f"half_width.{name} = {fmt(half_width)}")
    lines.append(f"r_squared = {fmt(model.r_squared)}")
    lines.append(f"residual_sd = {fmt(model.residual_sd)}")
    if model.x_mean is not None:
        lines.append(f"x_mean = {fmt(model.x_mean)}")
    if model.x_sumsq is not None:
        lines.append(f"x_sumsq = {fmt(model.x_sumsq)}")
    lines.append(f"residual_mean = {fmt(model.residual_mean)}")
    if model.residual_lag1_autocorr is not None:
        lines.append(f"residual_lag1_autocorr = {fmt(model.residual_lag1_autocorr)}")
    return "\n".join(lines) + "\n"


def model_from_text(text: str) -> FittedModel:
    """Parse the flat key-value block emitted by model_to_text."""
    entries: dict[str, str] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        entries[key.strip()] = value.strip()
    kind = ModelKind(entries["kind"])
    names = ("intercept",) + kind.regressor_names
    coefficients = tuple(float(entries[f"coefficient.{name}"]) for name in names)
    half_widths = tuple(float(entries[f"half_width.{name}"]) for name in names)
    lag1 = entries.get("residual_lag1_autocorr")
    return FittedModel(
        kind=kind,
        n=int(entries["n"]),
        coefficients=coefficients,
        half_widths=half_widths,
        r_squared=float(entries["r_squared"]),
        residual_sd=float(entries["residual_sd"]),
        x_mean=float(entries["x_mean"]) if "x_mean" in entries else None,
        x_sumsq=float(entries["x_sumsq"]) if "x_sumsq" in entries else None,
        residual_mean=float(entries.get("residual_mean", "0")),
        residual_lag1_autocorr=float(lag1) if lag1 is not None else None,
    )
