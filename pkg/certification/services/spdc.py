"""
spdc
====
Gaussian model of a photon-pair source and its detection chain: the joint
spectral density, the timing spread seen in coincidence histograms, and the
closed-form entropies used for feasibility budgets.

The joint spectrum is Gaussian in the sum and difference frequencies. Only
the two widths are physical inputs; for given second moments the Gaussian is
the maximum-entropy (least correlated) shape.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import ConfigError, UnderResolvedError
from .parallel import parallel_map
from .probcore import Grid1D, Grid2D

logger = logging.getLogger(__name__)

SPEED_OF_LIGHT         = 2.99792458e8
FWHM_PER_SIGMA         = 2.0 * math.sqrt(2.0 * math.log(2.0))
DEFAULT_GVD_FS2_PER_MM = 292.0
FEMTOSECOND            = 1e-15
POINTS_PER_SIGMA       = 20


@dataclass(frozen=True)
class SpdcParams:
    """Source and detector parameters in SI units (rad/s, s), crystal in mm and fs²/mm."""
    pump_center: float
    pump_sigma: float
    phasematch_sigma: float
    crystal_length_mm: float = 20.0
    gvd_fs2_per_mm: float = DEFAULT_GVD_FS2_PER_MM
    jitter_a: float = 0.0
    jitter_b: float = 0.0
    timebin: float = 1e-12

    def __post_init__(self):
        for name in ('pump_center', 'pump_sigma', 'phasematch_sigma', 'crystal_length_mm', 'gvd_fs2_per_mm', 'timebin'):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigError(f"{name} must be positive, got {value!r}")
        for name in ('jitter_a', 'jitter_b'):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ConfigError(f"{name} must be non-negative, got {value!r}")
        if not self.correlated:
            logger.warning(
                f"Pump width {self.pump_sigma:.4g} >= phase-matching width {self.phasematch_sigma:.4g}: "
                f"frequencies are not anti-correlated"
            )

    @property
    def correlated(self) -> bool:
        return self.pump_sigma < self.phasematch_sigma

    def warnings(self) -> list[str]:
        if self.correlated:
            return []
        return ["pump sigma is not below the phase-matching sigma (uncorrelated regime)"]


@dataclass(frozen=True)
class TimingModel:
    sigma_intrinsic: float
    sigma_observed: float
    fwhm_observed: float


@dataclass(frozen=True)
class SpectralWindow:
    """Rectangular (ω_A, ω_B) window sampled with a common step.

    Shrinking the B window is local post-selection on photon B; for the
    Gaussian model it leaves h(ω_A|ω_B) unchanged.
    """
    center_a: float
    center_b: float
    span_a: float
    span_b: float
    step: float

    def __post_init__(self):
        for name in ('span_a', 'span_b', 'step'):
            if not getattr(self, name) > 0:
                raise ConfigError(f"window {name} must be positive")

    @classmethod
    def around(cls, params: SpdcParams, span_a: float, span_b: float, step: float) -> 'SpectralWindow':
        half = params.pump_center / 2.0
        return cls(half, half, span_a, span_b, step)

    @classmethod
    def full(cls, params: SpdcParams, sigmas: float = 6.0, step: float | None = None) -> 'SpectralWindow':
        """Window holding ±``sigmas`` marginal standard deviations on both axes."""
        marginal = 0.5 * math.hypot(params.pump_sigma, params.phasematch_sigma)
        step = step or min(params.pump_sigma, params.phasematch_sigma) / POINTS_PER_SIGMA
        return cls.around(params, 2 * sigmas * marginal, 2 * sigmas * marginal, step)

    def axis(self, center: float, span: float) -> tuple[float, int]:
        cells = max(1, int(round(span / self.step)))
        return center - cells * self.step / 2.0, cells


def joint_spectral_density(params: SpdcParams, window: SpectralWindow, *, workers: int | None = None) -> Grid2D:
    """Double Gaussian in (ω_A+ω_B−ω_p, ω_A−ω_B), sampled at cell centers."""
    narrowest = min(params.pump_sigma, params.phasematch_sigma)
    if window.step > narrowest / POINTS_PER_SIGMA:
        raise UnderResolvedError(
            f"spectral step {window.step:.4g} exceeds min(sigma+, sigma-) {narrowest:.4g} / {POINTS_PER_SIGMA}"
        )
    start_a, na = window.axis(window.center_a, window.span_a)
    start_b, nb = window.axis(window.center_b, window.span_b)
    omega_b = start_b + (np.arange(nb) + 0.5) * window.step
    sp, sm  = params.pump_sigma, params.phasematch_sigma

    def row(i: int) -> np.ndarray:
        omega_a = start_a + (i + 0.5) * window.step
        plus    = omega_a + omega_b - params.pump_center
        minus   = omega_a - omega_b
        return np.exp(-0.5 * (plus / sp) ** 2 - 0.5 * (minus / sm) ** 2)

    values = np.vstack(parallel_map(row, range(na), workers))
    logger.info(f"Joint spectral density on a {na}x{nb} grid, step {window.step:.4g} rad/s")
    return Grid2D.normalize(start_a, window.step, start_b, window.step, values)


def gaussian_conditional_entropy(sigma_plus: float, sigma_minus: float) -> float:
    """h(ω_A|ω_B) of the double-Gaussian model, in bits."""
    variance = (sigma_plus ** 2 * sigma_minus ** 2) / (sigma_plus ** 2 + sigma_minus ** 2)
    return 0.5 * math.log2(2.0 * math.pi * math.e * variance)


# ── Timing ────────────────────────────────────────────────────────────────────

def intrinsic_timing_sigma(crystal_length_mm: float, gvd_fs2_per_mm: float = DEFAULT_GVD_FS2_PER_MM) -> float:
    """Spread of t_A − t_B from dispersion in the crystal, √(0.9·l·κ), in seconds."""
    if crystal_length_mm <= 0 or gvd_fs2_per_mm <= 0:
        raise ConfigError("crystal length and GVD must be positive")
    return math.sqrt(0.9 * crystal_length_mm * gvd_fs2_per_mm) * FEMTOSECOND


def observed_timing_sigma(intrinsic: float, jitter_a: float, jitter_b: float) -> TimingModel:
    if min(intrinsic, jitter_a, jitter_b) < 0:
        raise ConfigError("timing spreads must be non-negative")
    observed = math.sqrt(intrinsic ** 2 + jitter_a ** 2 + jitter_b ** 2)
    return TimingModel(intrinsic, observed, FWHM_PER_SIGMA * observed)


def timing_model(params: SpdcParams) -> TimingModel:
    return observed_timing_sigma(
        intrinsic_timing_sigma(params.crystal_length_mm, params.gvd_fs2_per_mm),
        params.jitter_a, params.jitter_b,
    )


def timing_difference_density(model: TimingModel, step: float, span_sigmas: float = 8.0) -> Grid1D:
    """Gaussian t_A − t_B density of width ``sigma_observed``; cell masses are exact."""
    sigma = model.sigma_observed
    if not sigma > 0:
        raise ConfigError("observed timing sigma must be positive")
    cells = 2 * int(math.ceil(span_sigmas * sigma / step))
    edges = (np.arange(cells + 1) - cells // 2) * step
    masses = np.diff(ndtr(edges / sigma))
    return Grid1D.normalize(float(edges[0]), step, masses / step)


# ── Closed-form entropies ─────────────────────────────────────────────────────

def gaussian_max_entropy(sigma: float) -> float:
    """½log₂(2πeσ²): the largest entropy any density of standard deviation σ can have."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma!r}")
    return 0.5 * math.log2(2.0 * math.pi * math.e * sigma * sigma)


def gaussian_max_entropy_fwhm(fwhm: float) -> float:
    if not fwhm > 0:
        raise ValueError(f"fwhm must be positive, got {fwhm!r}")
    return 0.5 * math.log2(math.pi * math.e * fwhm * fwhm / (4.0 * math.log(2.0)))


def lorentzian_entropy(fwhm: float) -> float:
    """log₂(2π·FWHM), the differential entropy of a Lorentzian."""
    if not fwhm > 0:
        raise ValueError(f"fwhm must be positive, got {fwhm!r}")
    return math.log2(2.0 * math.pi * fwhm)


# ── Unit conversions ──────────────────────────────────────────────────────────

def wavelength_to_angular_frequency(wavelength_m: float) -> float:
    return 2.0 * math.pi * SPEED_OF_LIGHT / wavelength_m


def linewidth_hz_to_pm(linewidth_hz: float, wavelength_m: float) -> float:
    return wavelength_m ** 2 * linewidth_hz / SPEED_OF_LIGHT * 1e12


def linewidth_pm_to_hz(linewidth_pm: float, wavelength_m: float) -> float:
    return linewidth_pm * 1e-12 * SPEED_OF_LIGHT / wavelength_m ** 2


def pm_to_rad_per_s(linewidth_pm: float, wavelength_m: float) -> float:
    return 2.0 * math.pi * linewidth_pm_to_hz(linewidth_pm, wavelength_m)
