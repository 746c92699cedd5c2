"""Forward models of light-scattering PM instruments.

Covers the single-particle Mie intensity functions, spherical particle mass,
mass concentration derived from optical-particle-counter bin counts, and the
mass-concentration sensitivity of an ensemble photometer/nephelometer.

Diameters are spherical optical-equivalent diameters in micrometers;
conversion to aerodynamic diameter is out of scope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

MAX_SIZE_PARAMETER = 1.0e4

DEFAULT_DENSITY = 1.65  # g/cm^3, common manufacturer assumption
DEFAULT_REFRACTIVE_INDEX = 1.5 + 0.0j


@dataclass(frozen=True)
class AerosolAssumptions:
    """Assumed aerosol properties: density, refractive index, size distribution.

    ``size_distribution`` maps diameter-bin midpoints (um) to weights that sum
    to one; bins are kept sorted by midpoint.
    """

    size_distribution: tuple[tuple[float, float], ...]
    density: float = DEFAULT_DENSITY
    refractive_index: complex = DEFAULT_REFRACTIVE_INDEX
    cut_diameter: float = 2.5

    def __post_init__(self):
        if isinstance(self.size_distribution, Mapping):
            items = tuple(sorted(self.size_distribution.items()))
        else:
            items = tuple(sorted(tuple(pair) for pair in self.size_distribution))
        object.__setattr__(self, "size_distribution", items)
        if not items:
            raise ValueError("size distribution is empty")
        diameters = [d for d, _ in items]
        weights = [w for _, w in items]
        if any(d <= 0 for d in diameters):
            raise ValueError("bin midpoints must be positive")
        if len(set(diameters)) != len(diameters):
            raise ValueError("bin midpoints must be strictly increasing")
        if any(w < 0 for w in weights):
            raise ValueError("weights must be non-negative")
        if abs(sum(weights) - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1 within 1e-9")
        if self.density <= 0:
            raise ValueError("density must be positive")
        if self.refractive_index.real < 1.0 or self.refractive_index.imag < 0.0:
            raise ValueError("refractive index must have real part >= 1, imag part >= 0")
        if self.cut_diameter <= 0:
            raise ValueError("cut diameter must be positive")


@dataclass(frozen=True)
class OpticalGeometry:
    """Settled instrument geometry: wavelength (um), observation angle (deg),
    and the lumped calibration constant."""

    wavelength: float
    observation_angle: float
    calibration_constant: float = 1.0

    def __post_init__(self):
        if not (self.wavelength > 0 and math.isfinite(self.wavelength)):
            raise ValueError("wavelength must be positive and finite")
        if not (0.0 < self.observation_angle < 180.0):
            raise ValueError("observation angle must lie in (0, 180) degrees")
        if not (self.calibration_constant > 0 and math.isfinite(self.calibration_constant)):
            raise ValueError("calibration constant must be positive and finite")


@dataclass(frozen=True)
class BinCounts:
    """Particle counts per diameter bin over one sampling period."""

    bin_midpoints: tuple[float, ...]
    counts: tuple[int, ...]
    flow_rate: float  # L/min
    duration: float  # seconds

    def __post_init__(self):
        object.__setattr__(self, "bin_midpoints", tuple(self.bin_midpoints))
        object.__setattr__(self, "counts", tuple(self.counts))
        if len(self.bin_midpoints) != len(self.counts):
            raise ValueError("bin midpoints and counts must have equal length")
        if any(b <= 0 for b in self.bin_midpoints):
            raise ValueError("bin midpoints must be positive")
        if list(self.bin_midpoints) != sorted(set(self.bin_midpoints)):
            raise ValueError("bin midpoints must be strictly increasing")
        if any(c < 0 or c != int(c) for c in self.counts):
            raise ValueError("counts must be non-negative integers")
        if self.flow_rate <= 0 or self.duration <= 0:
            raise ValueError("flow rate and duration must be positive")

    @property
    def sampled_volume_m3(self) -> float:
        return self.flow_rate * self.duration / 60.0 * 1e-3


def wiscombe_terms(size_parameter: float) -> int:
    """Series truncation depth for the Mie sums."""
    return int(math.ceil(size_parameter + 4.0 * size_parameter ** (1.0 / 3.0) + 2.0))


def mie_intensity(
    size_parameter: float,
    refractive_index: complex,
    angle: float,
    terms: int | None = None,
) -> tuple[float, float]:
    """Perpendicular and parallel polarized Mie intensity functions |S1|^2, |S2|^2.

    The logarithmic derivative of the internal field is evaluated by downward
    recurrence (numerically stable for absorbing indices); the Riccati-Bessel
    functions of the real size parameter go upward.  ``terms`` overrides the
    default truncation depth, mainly so convergence can be probed.
    """
    x = float(size_parameter)
    m = complex(refractive_index)
    if not (math.isfinite(x) and math.isfinite(angle)):
        raise ValueError("size parameter and angle must be finite")
    if not (math.isfinite(m.real) and math.isfinite(m.imag)):
        raise ValueError("refractive index must be finite")
    if x <= 0:
        raise ValueError("size parameter must be positive")
    if x > MAX_SIZE_PARAMETER:
        raise ValueError(f"size parameter {x} out of range (max {MAX_SIZE_PARAMETER})")

    n_stop = terms if terms is not None else wiscombe_terms(x)
    if n_stop < 1:
        raise ValueError("at least one series term is required")
    y = m * x
    # Downward recurrence start well above both truncation depth and |mx|.
    n_down = max(n_stop, int(abs(y))) + 15
    d = [0j] * (n_down + 1)
    for n in range(n_down, 1, -1):
        d[n - 1] = n / y - 1.0 / (d[n] + n / y)

    mu = math.cos(math.radians(angle))

    # Riccati-Bessel psi, chi by upward recurrence over the real argument.
    psi_prev, psi = math.cos(x), math.sin(x)  # psi_{-1}, psi_0
    chi_prev, chi = -math.sin(x), math.cos(x)  # chi_{-1}, chi_0

    pi_prev, pi_n = 0.0, 1.0  # angular functions pi_0, pi_1
    s1 = 0j
    s2 = 0j
    for n in range(1, n_stop + 1):
        psi_n = (2 * n - 1) / x * psi - psi_prev
        chi_n = (2 * n - 1) / x * chi - chi_prev
        xi_n = complex(psi_n, -chi_n)
        xi_prev = complex(psi, -chi)

        da = d[n] / m + n / x
        db = d[n] * m + n / x
        a_n = (da * psi_n - psi) / (da * xi_n - xi_prev)
        b_n = (db * psi_n - psi) / (db * xi_n - xi_prev)

        tau_n = n * mu * pi_n - (n + 1) * pi_prev
        f_n = (2 * n + 1) / (n * (n + 1))
        s1 += f_n * (a_n * pi_n + b_n * tau_n)
        s2 += f_n * (a_n * tau_n + b_n * pi_n)

        psi_prev, psi = psi, psi_n
        chi_prev, chi = chi, chi_n
        pi_next = ((2 * n + 1) * mu * pi_n - (n + 1) * pi_prev) / n
        pi_prev, pi_n = pi_n, pi_next

    return abs(s1) ** 2, abs(s2) ** 2


def particle_mass(density: float, diameter: float) -> float:
    """Mass of a spherical particle in micrograms (density g/cm^3, diameter um)."""
    if density <= 0:
        raise ValueError("density must be positive")
    if diameter < 0:
        raise ValueError("diameter must be non-negative")
    # g/cm^3 * um^3 -> 1e-12 g = 1e-6 ug per unit of rho*d^3.
    return density * math.pi * diameter**3 / 6.0 * 1e-6


def opc_mass_concentration(bins: BinCounts, assumptions: AerosolAssumptions) -> float:
    """Mass concentration (ug/m^3) from counted particles below the size cut."""
    volume = bins.sampled_volume_m3
    if volume <= 0:
        raise ValueError("sampled volume must be positive")
    total = 0.0
    for diameter, count in zip(bins.bin_midpoints, bins.counts):
        if diameter <= assumptions.cut_diameter:
            total += count * particle_mass(assumptions.density, diameter)
    return total / volume


def pnm_sensitivity(assumptions: AerosolAssumptions, geometry: OpticalGeometry) -> float:
    """Ensemble-photometer signal per unit mass concentration (up to the
    calibration constant).

    Sums f(d) / (rho d^3) * (i1 + i2) over the assumed size distribution, with
    the intensity functions evaluated at the instrument's angle and wavelength.
    All distribution mass must sit at or below the size cut.
    """
    beyond = [d for d, w in assumptions.size_distribution if w > 0 and d > assumptions.cut_diameter]
    if beyond:
        raise ValueError(
            f"distribution mass beyond the {assumptions.cut_diameter} um cut: {beyond}"
        )
    total = 0.0
    for diameter, weight in assumptions.size_distribution:
        if weight == 0.0:
            continue
        x = math.pi * diameter / geometry.wavelength
        i1, i2 = mie_intensity(x, assumptions.refractive_index, geometry.observation_angle)
        total += weight / (assumptions.density * diameter**3) * (i1 + i2)
    return geometry.calibration_constant * total


def pnm_mass_from_signal(signal: float, sensitivity: float) -> float:
    """Invert a photometer signal back to mass concentration (ug/m^3)."""
    if not (sensitivity > 0 and math.isfinite(sensitivity)):
        raise ValueError("sensitivity must be positive")
    return signal / sensitivity
