"""Statistical primitives: sample moments, Pearson r, t and chi-square quantiles.

The quantile functions invert the regularized incomplete beta/gamma CDFs by
bracketed root finding, which keeps them checkable against a brute-force
CDF-integration oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special
from scipy.optimize import brentq


@dataclass(frozen=True)
class SampleStats:
    """Count, mean, and n-1 denominator standard deviation (None when n < 2)."""

    n: int
    mean: float
    sd: float | None


def sample_stats(values: Sequence[float]) -> SampleStats:
    """Sample mean and standard deviation with the n-1 denominator."""
    data = np.asarray(values, dtype=float)
    if data.size == 0:
        raise ValueError("sample_stats needs at least one value")
    mean = float(np.mean(data))
    if data.size < 2:
        return SampleStats(n=1, mean=mean, sd=None)
    sd = float(math.sqrt(float(np.sum((data - mean) ** 2)) / (data.size - 1)))
    return SampleStats(n=int(data.size), mean=mean, sd=sd)


def _check_p_df(p: float, df: float) -> None:
    if not (0.0 < p < 1.0):
        raise ValueError(f"probability must lie in (0, 1), got {p}")
    if not (df >= 1.0 and math.isfinite(df)):
        raise ValueError(f"degrees of freedom must be >= 1, got {df}")


def t_cdf(x: float, df: float) -> float:
    """CDF of Student's t via the regularized incomplete beta function."""
    if x == 0.0:
        return 0.5
    z = df / (df + x * x)
    tail = 0.5 * special.betainc(df / 2.0, 0.5, z)
    return 1.0 - tail if x > 0 else tail


def t_quantile(p: float, df: float) -> float:
    """Inverse t CDF by bracketed inversion; symmetric about p = 0.5."""
    _check_p_df(p, df)
    if p == 0.5:
        return 0.0
    if p < 0.5:
        return -t_quantile(1.0 - p, df)
    hi = 1.0
    while t_cdf(hi, df) < p:
        hi *= 2.0
        if hi > 1e12:
            raise ValueError(f"failed to bracket t quantile for p={p}, df={df}")
    return float(brentq(lambda x: t_cdf(x, df) - p, 0.0, hi, xtol=1e-12, rtol=8.9e-16))


def chi2_cdf(x: float, df: float) -> float:
    """CDF of the chi-square distribution (regularized lower incomplete gamma)."""
    if x <= 0.0:
        return 0.0
    return float(special.gammainc(df / 2.0, x / 2.0))


def chi2_quantile(p: float, df: float) -> float:
    """Inverse chi-square CDF by bracketed inversion."""
    _check_p_df(p, df)
    hi = max(df, 1.0)
    while chi2_cdf(hi, df) < p:
        hi *= 2.0
        if hi > 1e300:
            raise ValueError(f"failed to bracket chi2 quantile for p={p}, df={df}")
    return float(brentq(lambda x: chi2_cdf(x, df) - p, 0.0, hi, xtol=1e-12, rtol=8.9e-16))


def pearson_r(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation coefficient, clamped to [-1, 1] against rounding."""
    xs = np.asarray(x, dtype=float)
    ys = np.asarray(y, dtype=float)
    if xs.shape != ys.shape:
        raise ValueError("x and y must have equal length")
    if xs.size < 2:
        raise ValueError("correlation needs at least two pairs")
    dx = xs - xs.mean()
    dy = ys - ys.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        raise ValueError("correlation undefined: a column has zero variance")
    r = float(np.dot(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))
