"""
witness
=======
Entropic entanglement witnesses for energy and time, plus the budgets that
say how fine a frequency measurement has to be before a witness can succeed.

Two inequalities hold for every separable state:
  - sum/difference form:  h(t_A − t_B) + h(ω_A + ω_B) ≥ log₂(2πe)
  - conditional form:     h(t_A|t_B) + h(ω_A|ω_B) ≥ log₂(πe)
Entanglement is certified only when conservative upper bounds on the left
side fall strictly below the threshold.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

from .coarsegrain import BoundKind, EntropyBound
from .errors import KindMismatchError
from .spdc import FWHM_PER_SIGMA, SPEED_OF_LIGHT, linewidth_hz_to_pm

logger = logging.getLogger(__name__)


class Inequality(str, Enum):
    SUM_DIFF    = 'sum_diff'
    CONDITIONAL = 'conditional'


THRESHOLDS = {
    Inequality.SUM_DIFF:    math.log2(2.0 * math.pi * math.e),
    Inequality.CONDITIONAL: math.log2(math.pi * math.e),
}

# Conditional entropies never exceed the entropies of sums or differences.
_SUBSTITUTES = {
    'time':      BoundKind.DIFF_VARIABLE,
    'frequency': BoundKind.SUM_VARIABLE,
}


@dataclass(frozen=True)
class WitnessReport:
    h_time_bound: float
    h_freq_bound: float
    threshold: float
    margin: float
    inequality: Inequality
    certified: bool
    w0_used: float
    preconditions_met: bool
    inputs_digest: dict[str, str] = field(default_factory=dict)
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            'h_time_bound':      self.h_time_bound,
            'h_freq_bound':      self.h_freq_bound,
            'threshold':         self.threshold,
            'margin':            self.margin,
            'inequality':        self.inequality.value,
            'certified':         self.certified,
            'w0_used':           self.w0_used,
            'preconditions_met': self.preconditions_met,
            'inputs_digest':     dict(self.inputs_digest),
            'notes':             list(self.notes),
        }

    def summary(self) -> str:
        verdict = 'CERTIFIED' if self.certified else 'NOT CERTIFIED'
        lines = [
            f"Witness ({self.inequality.value}): {verdict}",
            f"  time bound       {self.h_time_bound:+.4f} bits",
            f"  frequency bound  {self.h_freq_bound:+.4f} bits",
            f"  threshold        {self.threshold:.4f} bits",
            f"  margin           {self.margin:+.4f} bits",
            f"  w0               {self.w0_used:.6f}",
            f"  preconditions    {'met' if self.preconditions_met else 'FAILED'}",
        ]
        lines += [f"  note: {note}" for note in self.notes]
        return "\n".join(lines)


def _check_kind(bound: EntropyBound, arm: str, inequality: Inequality, notes: list[str]) -> None:
    substitute = _SUBSTITUTES[arm]
    if inequality == Inequality.SUM_DIFF:
        if bound.kind != substitute:
            raise KindMismatchError(
                f"{arm} bound must be {substitute.value} for the sum/difference witness, got {bound.kind.value}"
            )
        return
    if bound.kind == BoundKind.CONDITIONAL:
        return
    if bound.kind == substitute:
        notes.append(f"{arm} conditional entropy bounded by its {substitute.value} entropy")
        return
    raise KindMismatchError(
        f"{arm} bound must be conditional or {substitute.value} for the conditional witness, got {bound.kind.value}"
    )


def evaluate_witness(
    h_time: EntropyBound,
    h_freq: EntropyBound,
    inequality: Inequality | str,
    *,
    inputs_digest: dict[str, str] | None = None,
    extra_notes: tuple[str, ...] = (),
) -> WitnessReport:
    """Compare the bound sum with the threshold; certified requires valid bounds and margin > 0."""
    inequality = Inequality(inequality)
    notes: list[str] = []
    _check_kind(h_time, 'time', inequality, notes)
    _check_kind(h_freq, 'frequency', inequality, notes)

    threshold = THRESHOLDS[inequality]
    margin    = threshold - (h_time.value_bits + h_freq.value_bits)
    preconditions_met = h_time.valid and h_freq.valid
    if not h_time.valid:
        notes.append("time bound is not valid (majorization precondition failed)")
    if not h_freq.valid:
        notes.append("frequency bound is not valid (majorization precondition failed)")
    notes.extend(extra_notes)

    certified = preconditions_met and margin > 0
    logger.info(f"{'✅' if certified else '❌'} Witness {inequality.value}: margin {margin:+.4f} bits")
    return WitnessReport(
        h_time_bound=h_time.value_bits,
        h_freq_bound=h_freq.value_bits,
        threshold=threshold,
        margin=margin,
        inequality=inequality,
        certified=certified,
        w0_used=min(h_time.correction_w0, h_freq.correction_w0),
        preconditions_met=preconditions_met,
        inputs_digest=dict(inputs_digest or {}),
        notes=tuple(notes),
    )


# ── Budgets ───────────────────────────────────────────────────────────────────

class FrequencyBudget(NamedTuple):
    max_h_freq: float
    max_sigma: float
    max_fwhm_gauss_pm: float
    max_fwhm_lorentz: float


def frequency_budget(h_time_bound: float, center_wavelength_m: float) -> FrequencyBudget:
    """Largest sum-frequency spread compatible with the conditional witness.

    ``max_sigma`` and ``max_fwhm_lorentz`` are angular frequencies; the
    Gaussian FWHM is also given as a wavelength linewidth at the center
    wavelength.
    """
    if not (math.isfinite(h_time_bound) and center_wavelength_m > 0):
        raise ValueError("frequency budget needs a finite time bound and a positive wavelength")
    max_h     = THRESHOLDS[Inequality.CONDITIONAL] - h_time_bound
    max_sigma = 2.0 ** (max_h - 0.5 * math.log2(2.0 * math.pi * math.e))
    fwhm_hz   = FWHM_PER_SIGMA * max_sigma / (2.0 * math.pi)
    return FrequencyBudget(
        max_h_freq=max_h,
        max_sigma=max_sigma,
        max_fwhm_gauss_pm=linewidth_hz_to_pm(fwhm_hz, center_wavelength_m),
        max_fwhm_lorentz=2.0 ** max_h / (2.0 * math.pi),
    )


def grating_resolution(grooves_per_mm: float, beam_diameter_mm: float, center_freq_hz: float) -> float:
    """Smallest resolvable Δν (Hz) of a grating used in first order."""
    if min(grooves_per_mm, beam_diameter_mm, center_freq_hz) <= 0:
        raise ValueError("grating parameters must be positive")
    return center_freq_hz / (grooves_per_mm * beam_diameter_mm)


def required_grating_width(grooves_per_mm: float, center_freq_hz: float, target_hz: float) -> float:
    """Illuminated width (mm) needed to resolve ``target_hz``."""
    if min(grooves_per_mm, center_freq_hz, target_hz) <= 0:
        raise ValueError("grating parameters must be positive")
    return center_freq_hz / (target_hz * grooves_per_mm)


class PrismResolution(NamedTuple):
    relative: float
    delta_nu_hz: float


def prism_resolution(side_length_m: float, n: float, n_group: float, wavelength_m: float) -> PrismResolution:
    """Rayleigh limit of an equilateral prism in vacuum, resolving power |b·n(n − n_g)/λ|."""
    power = abs(side_length_m * n * (n - n_group) / wavelength_m)
    if power == 0:
        raise ValueError("a prism without dispersion has no resolving power")
    return PrismResolution(1.0 / power, SPEED_OF_LIGHT / wavelength_m / power)


# ── Entanglement quantity ─────────────────────────────────────────────────────

class EbitsBound(NamedTuple):
    formula_footnote: float
    formula_e_based: float
    matches_reported: str
    uncertainty: float | None


def ebits_lower_bound(uncertainty_product: float, uncertainty: float | None = None) -> EbitsBound:
    """Two readings of the ebits lower bound from an uncertainty product x.

    ``formula_footnote`` is −1 − log₂x, ``formula_e_based`` is −log₂(e·x).
    The e-based reading is the one that reproduces published values. Both are
    clamped at 0; the propagated uncertainty is σ_x / (x ln 2).
    """
    x = uncertainty_product
    if not x > 0:
        raise ValueError(f"uncertainty product must be positive, got {x!r}")
    footnote = max(0.0, -1.0 - math.log2(x))
    e_based  = max(0.0, -math.log2(math.e * x))
    spread   = None if uncertainty is None else abs(uncertainty) / (x * math.log(2.0))
    return EbitsBound(footnote, e_based, 'formula_e_based', spread)
