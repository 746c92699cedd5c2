"""Independent oracles used to pin expected values in the test suite.

Each oracle deliberately takes a different computational route than the
implementation it checks: quantiles integrate the density numerically instead
of using incomplete-function inverses, the Mie reference builds scattering
coefficients directly from library spherical Bessel functions instead of the
continued-fraction logarithmic derivative, and the regression oracle solves
the Gram normal equations directly instead of using an orthogonal
decomposition.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, stats
from scipy.optimize import brentq
from scipy.special import spherical_jn, spherical_yn

from pmcal.evaluate import RelErrorSet


# --- quantile oracles: quadrature CDF + bracketed bisection ---------------

def t_cdf_quad(x: float, df: float) -> float:
    def pdf(u):
        return (1.0 + u * u / df) ** (-(df + 1.0) / 2.0)

    norm, _ = integrate.quad(pdf, -np.inf, np.inf, epsabs=1e-13, epsrel=1e-12)
    if x >= 0:
        upper, _ = integrate.quad(pdf, 0.0, x, epsabs=1e-13, epsrel=1e-12)
        return 0.5 + upper / norm
    lower, _ = integrate.quad(pdf, x, 0.0, epsabs=1e-13, epsrel=1e-12)
    return 0.5 - lower / norm


def t_quantile_quad(p: float, df: float) -> float:
    hi = 1.0
    while t_cdf_quad(hi, df) < p:
        hi *= 2.0
    lo = -1.0
    while t_cdf_quad(lo, df) > p:
        lo *= 2.0
    return brentq(lambda x: t_cdf_quad(x, df) - p, lo, hi, xtol=1e-10)


def chi2_quantile_quad(p: float, df: float) -> float:
    mode = max(df - 2.0, 0.0)

    def log_pdf(u):
        return (df / 2.0 - 1.0) * math.log(u) - u / 2.0 if u > 0 else -np.inf

    shift = log_pdf(mode) if mode > 0 else 0.0

    def pdf(u):
        return math.exp(log_pdf(u) - shift) if u > 0 else 0.0

    points = [mode] if mode > 0 else None
    norm, _ = integrate.quad(pdf, 0.0, df + 60.0 * math.sqrt(2.0 * df) + 60.0,
                             points=points, limit=200, epsabs=1e-13, epsrel=1e-12)

    def cdf(q):
        inner = [mode] if (mode > 0 and mode < q) else None
        value, _ = integrate.quad(pdf, 0.0, q, points=inner, limit=200,
                                  epsabs=1e-13, epsrel=1e-12)
        return value / norm

    hi = max(df, 1.0)
    while cdf(hi) < p:
        hi *= 2.0
    return brentq(lambda q: cdf(q) - p, 0.0, hi, xtol=1e-10, rtol=1e-12)


# --- Mie oracle: direct Lorenz-Mie coefficients (real index only) ---------

def mie_reference(x: float, m: float, angle_deg: float, extra_terms: int = 10) -> tuple[float, float]:
    if m != float(m):
        raise ValueError("reference oracle supports real refractive indices only")
    n_max = int(math.ceil(x + 4.0 * x ** (1.0 / 3.0) + 2.0)) + extra_terms
    orders = np.arange(1, n_max + 1)

    def psi(n, rho):
        return rho * spherical_jn(n, rho)

    def psi_prime(n, rho):
        return spherical_jn(n, rho) + rho * spherical_jn(n, rho, derivative=True)

    def xi(n, rho):
        return rho * (spherical_jn(n, rho) - 1j * spherical_yn(n, rho))

    def xi_prime(n, rho):
        return (spherical_jn(n, rho) - 1j * spherical_yn(n, rho)) + rho * (
            spherical_jn(n, rho, derivative=True) - 1j * spherical_yn(n, rho, derivative=True)
        )

    mx = m * x
    a = np.empty(n_max, dtype=complex)
    b = np.empty(n_max, dtype=complex)
    for i, n in enumerate(orders):
        pmx, ppmx = psi(n, mx), psi_prime(n, mx)
        px, ppx = psi(n, x), psi_prime(n, x)
        xx, xpx = xi(n, x), xi_prime(n, x)
        a[i] = (m * pmx * ppx - px * ppmx) / (m * pmx * xpx - xx * ppmx)
        b[i] = (pmx * ppx - m * px * ppmx) / (pmx * xpx - m * xx * ppmx)

    mu = math.cos(math.radians(angle_deg))
    pi_nm1, pi_n = 0.0, 1.0  # pi_0, pi_1
    s1 = 0j
    s2 = 0j
    for i, n in enumerate(orders):
        tau_n = n * mu * pi_n - (n + 1) * pi_nm1
        factor = (2 * n + 1) / (n * (n + 1))
        s1 += factor * (a[i] * pi_n + b[i] * tau_n)
        s2 += factor * (a[i] * tau_n + b[i] * pi_n)
        pi_np1 = ((2 * n + 1) * mu * pi_n - (n + 1) * pi_nm1) / n
        pi_nm1, pi_n = pi_n, pi_np1
    return abs(s1) ** 2, abs(s2) ** 2


def rayleigh_intensity(x: float, m: complex, angle_deg: float) -> tuple[float, float]:
    """Small-particle analytic limit of the intensity functions."""
    polarizability = abs((m * m - 1.0) / (m * m + 2.0)) ** 2
    i1 = x ** 6 * polarizability
    return i1, i1 * math.cos(math.radians(angle_deg)) ** 2


# --- regression oracle: direct Gram-matrix normal equations ---------------

def gram_fit(columns: list[np.ndarray], y: np.ndarray) -> np.ndarray:
    design = np.column_stack([np.ones(len(y))] + columns)
    gram = design.T @ design
    return np.linalg.solve(gram, design.T @ y)


def textbook_prediction_interval(
    x: np.ndarray, y: np.ndarray, grid: np.ndarray, level: float
) -> tuple[np.ndarray, np.ndarray]:
    """Simple-regression prediction interval from first principles
    (scipy.stats supplies the t quantile, independent of the package's own)."""
    n = len(x)
    beta1 = float(np.sum((x - x.mean()) * (y - y.mean())) / np.sum((x - x.mean()) ** 2))
    beta0 = float(y.mean() - beta1 * x.mean())
    fitted = beta0 + beta1 * x
    s = math.sqrt(float(np.sum((y - fitted) ** 2)) / (n - 2))
    t_crit = stats.t.ppf(0.5 + level / 2.0, n - 2)
    line = beta0 + beta1 * grid
    margin = t_crit * s * np.sqrt(1.0 + 1.0 / n + (grid - x.mean()) ** 2 / np.sum((x - x.mean()) ** 2))
    return line - margin, line + margin


# --- constructive fixtures -------------------------------------------------

def errors_with_exact_stats(mean: float, sd: float, n: int, floor: float = 3.0) -> RelErrorSet:
    """A relative-error set whose sample mean and sd equal the given values
    exactly (two-point construction)."""
    values = np.empty(n)
    if n % 2 == 0:
        half = n // 2
        delta = sd * math.sqrt((n - 1) / n)
        values[:half] = mean - delta
        values[half:] = mean + delta
    else:
        values[0] = mean
        half = (n - 1) // 2
        values[1:half + 1] = mean - sd
        values[half + 1:] = mean + sd
    return RelErrorSet(values=values, n=n, floor=floor, n_total=n)
