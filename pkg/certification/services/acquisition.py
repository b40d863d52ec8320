"""
acquisition
===========
Measured and simulated count data: coincidence histograms, joint filter-pair
count tables, background subtraction, seeded measurement campaigns and the
Poisson bootstrap of the witness margin.

Random streams come from one ``numpy.random.SeedSequence`` per campaign or
bootstrap. Children are spawned in a fixed order and every row or resample
owns its own ``PCG64`` stream, so outputs do not depend on the thread count.
"""
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
import pandas as pd

from .coarsegrain import (
    CoarseGrained2D,
    EntropyBound,
    BoundKind,
    conditional_entropy_bound,
    filter_sample_joint,
    sum_entropy_bound,
    sum_variable_distribution,
)
from .csv_service import read_table, write_table
from .errors import (
    ConfigError,
    DimensionMismatchError,
    EmptyHistogramError,
    InvalidDistributionError,
    PeakInWingsError,
    SchemaError,
)
from .filters import FilterBank, WeightReport, bank_weights, majorized_by_tophat
from .parallel import parallel_map
from .probcore import Grid1D, Grid2D, ProbMatrix, ProbVector, conditional_entropy, shannon_entropy
from .spdc import TimingModel, timing_difference_density
from .witness import Inequality, evaluate_witness

logger = logging.getLogger(__name__)

PICOSECOND       = 1e-12
RNG_ALGORITHM    = 'numpy.PCG64/SeedSequence'
PEAK_IN_WINGS    = 0.10
MIN_RESAMPLES    = 100
CI_WARN_FRACTION = 0.10

HISTOGRAM_COLUMNS = ('bin_start_ps', 'counts')
COUNTS_COLUMNS    = ('m_index', 'n_index', 'counts')


def _readonly_counts(values, ndim: int, what: str) -> np.ndarray:
    arr = np.array(values)
    if arr.dtype.kind not in 'iuf':
        arr = arr.astype(float)
    if arr.ndim != ndim or arr.size == 0:
        raise InvalidDistributionError(f"{what} must be a non-empty {ndim}-d array")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise InvalidDistributionError(f"{what} must be finite and non-negative")
    arr.setflags(write=False)
    return arr


# ── Timing histograms ─────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class CoincidenceHistogram:
    """Counts of t_A − t_B in bins of ``bin_width`` seconds; bin 0 starts at ``t0``."""
    bin_width: float
    t0: float
    counts: np.ndarray
    background_per_bin: float = 0.0
    provenance: tuple[str, ...] = ()

    def __post_init__(self):
        if not (math.isfinite(self.bin_width) and self.bin_width > 0):
            raise InvalidDistributionError(f"histogram bin width must be positive, got {self.bin_width!r}")
        if not self.background_per_bin >= 0:
            raise InvalidDistributionError("background per bin must be non-negative")
        object.__setattr__(self, 'counts', _readonly_counts(self.counts, 1, 'histogram counts'))

    @property
    def total(self) -> float:
        return float(self.counts.sum())

    def bin_starts(self) -> np.ndarray:
        return self.t0 + self.bin_width * np.arange(self.counts.size)

    @classmethod
    def expected(cls, density: Grid1D, total_pairs: float, background_per_bin: float = 0.0) -> 'CoincidenceHistogram':
        """Noiseless histogram: ``total_pairs`` times each cell mass, plus a flat floor."""
        counts = total_pairs * density.cell_masses() + background_per_bin
        return cls(density.step, density.start, counts, 0.0, ('expected counts',))


def load_histogram(path: str | Path) -> CoincidenceHistogram:
    frame = read_table(path, HISTOGRAM_COLUMNS, integer_columns=('counts',), non_negative=('counts',))
    if len(frame) < 2:
        raise SchemaError(f"{path}: a histogram needs at least two bins")
    lines  = frame.attrs['line_numbers']
    starts = frame['bin_start_ps'].to_numpy(dtype=float)
    steps  = np.diff(starts)
    width  = float(steps[0])
    if width <= 0:
        raise SchemaError(f"{path}: bin starts must increase", line=lines[1])
    uneven = np.flatnonzero(np.abs(steps - width) > 1e-6 * width)
    if uneven.size:
        raise SchemaError(f"{path}: bin starts must be uniformly spaced", line=lines[int(uneven[0]) + 1])
    counts = frame['counts'].to_numpy().astype(np.int64)
    return CoincidenceHistogram(width * PICOSECOND, float(starts[0]) * PICOSECOND, counts, 0.0, (f"loaded {Path(path).name}",))


def save_histogram(h: CoincidenceHistogram, path: str | Path, digest: str | None = None) -> Path:
    counts = h.counts
    if counts.dtype.kind == 'f' and np.all(counts == np.round(counts)):
        counts = counts.astype(np.int64)
    frame = pd.DataFrame({
        'bin_start_ps': h.bin_starts() / PICOSECOND,
        'counts':       counts,
    })
    return write_table(path, frame, digest)


def subtract_background(h: CoincidenceHistogram, wing_fraction: float = 0.1) -> CoincidenceHistogram:
    """Remove a flat accidental floor estimated from the outer bins on both sides.

    The floor is the mean of the wing bins; subtracted counts are clamped at
    zero. A wing bin exceeding the floor by more than 10% of the peak excess
    means the coincidence peak reaches into the wings, which aborts.
    """
    if not 0 < wing_fraction <= 0.4:
        raise ConfigError(f"wing fraction must lie in (0, 0.4], got {wing_fraction!r}")
    n     = h.counts.size
    wings = max(1, int(math.floor(wing_fraction * n)))
    if 2 * wings >= n:
        raise ConfigError(f"histogram of {n} bins is too short for {wings} wing bins per side")

    counts     = h.counts.astype(float)
    wing       = np.concatenate((counts[:wings], counts[-wings:]))
    background = float(wing.mean())
    peak_excess = float(counts.max()) - background
    wing_excess = float(wing.max()) - background
    if peak_excess > 0 and wing_excess > PEAK_IN_WINGS * peak_excess:
        raise PeakInWingsError(
            f"wing bin exceeds the floor {background:.3f} by {wing_excess:.3f}, "
            f"more than {PEAK_IN_WINGS:.0%} of the peak excess {peak_excess:.3f}"
        )

    note = f"background {background:.6g}/bin from {wings} wing bins per side; clamp + renormalize"
    logger.info(f"Background subtraction: {note}")
    return CoincidenceHistogram(
        h.bin_width, h.t0, np.maximum(counts - background, 0.0),
        h.background_per_bin + background, h.provenance + (note,),
    )


def timing_entropy_bound(h: CoincidenceHistogram) -> EntropyBound:
    """H(T_A − T_B) + log₂Δt, an upper bound on h(t_A − t_B) in bits (SI seconds)."""
    if h.total <= 0:
        raise EmptyHistogramError("histogram has no counts left")
    entropy = shannon_entropy(ProbVector.normalize(h.counts.astype(float)))
    value   = entropy + math.log2(h.bin_width)
    provenance = f"H(T)={entropy:.6f} bits + log2({h.bin_width:.6g} s); " + "; ".join(h.provenance)
    return EntropyBound(value, BoundKind.DIFF_VARIABLE, 1.0, True, provenance.rstrip('; '))


# ── Joint counts ──────────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class JointCounts:
    """Coincidences per filter pair; row m is filter m of arm A, column n filter n of arm B."""
    counts: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'counts', _readonly_counts(self.counts, 2, 'joint counts'))

    @property
    def shape(self) -> tuple[int, int]:
        return self.counts.shape

    @property
    def total(self) -> float:
        return float(self.counts.sum())

    def probabilities(self) -> ProbMatrix:
        if self.total <= 0:
            raise EmptyHistogramError("joint count table is empty")
        return ProbMatrix.normalize(self.counts.astype(float))

    def to_coarse_grained(self, bank_a: FilterBank, bank_b: FilterBank) -> CoarseGrained2D:
        if self.shape != (len(bank_a), len(bank_b)):
            raise DimensionMismatchError(
                f"count table {self.shape} does not match banks of {len(bank_a)} and {len(bank_b)} filters"
            )
        return CoarseGrained2D(
            self.probabilities(), bank_a.nominal_spacing, bank_b.nominal_spacing,
            bank_a.nominal_centers[0], bank_b.nominal_centers[0],
        )


def load_joint_counts(path: str | Path, shape: tuple[int, int] | None = None) -> JointCounts:
    frame = read_table(path, COUNTS_COLUMNS, integer_columns=COUNTS_COLUMNS, non_negative=COUNTS_COLUMNS)
    if frame.empty:
        raise EmptyHistogramError(f"{path}: no count rows")
    m = frame['m_index'].to_numpy().astype(int)
    n = frame['n_index'].to_numpy().astype(int)
    if frame.duplicated(['m_index', 'n_index']).any():
        raise SchemaError(f"{path}: duplicate (m_index, n_index) rows")
    rows, cols = shape or (int(m.max()) + 1, int(n.max()) + 1)
    if m.max() >= rows or n.max() >= cols:
        raise DimensionMismatchError(f"{path}: indices exceed the expected table shape {(rows, cols)}")
    table = np.zeros((rows, cols), dtype=np.int64)
    table[m, n] = frame['counts'].to_numpy().astype(np.int64)
    return JointCounts(table)


def save_joint_counts(jc: JointCounts, path: str | Path, digest: str | None = None) -> Path:
    m, n   = np.indices(jc.shape)
    counts = jc.counts
    if counts.dtype.kind == 'f' and np.all(counts == np.round(counts)):
        counts = counts.astype(np.int64)
    frame = pd.DataFrame({'m_index': m.ravel(), 'n_index': n.ravel(), 'counts': counts.ravel()})
    return write_table(path, frame, digest)


# ── Bank evidence and the margin pipeline ─────────────────────────────────────

@dataclass(frozen=True)
class BankEvidence:
    """What the filter calibration says about the majorization precondition.

    The joint weight of a filter pair is the product of the arm weights, so
    ``w0`` is the product of the two bank minima.
    """
    bank_a: FilterBank
    bank_b: FilterBank
    w0: float
    majorization_ok: bool
    weights_a: WeightReport | None = None
    weights_b: WeightReport | None = None
    notes: tuple[str, ...] = ()

    @property
    def origins(self) -> tuple[str, str]:
        return self.bank_a.origin, self.bank_b.origin

    @property
    def spacings(self) -> tuple[float, float]:
        return self.bank_a.nominal_spacing, self.bank_b.nominal_spacing

    @classmethod
    def from_banks(cls, bank_a: FilterBank, bank_b: FilterBank, **weight_options) -> 'BankEvidence':
        """Weights of both arms, and the top-hat check of each arm's mean filter.

        When both arms share one bank object its weights and check are computed once.
        """
        weights_a = bank_weights(bank_a, arm='A', **weight_options)
        check_a   = majorized_by_tophat(weights_a.target_profile, bank_a.nominal_spacing)
        if bank_b is bank_a:
            weights_b, check_b = weights_a._replace(arm='B'), check_a
        else:
            weights_b = bank_weights(bank_b, arm='B', **weight_options)
            check_b   = majorized_by_tophat(weights_b.target_profile, bank_b.nominal_spacing)
        notes = []
        for arm, check in (('A', check_a), ('B', check_b)):
            if not check.verdict:
                notes.append(f"arm {arm} mean filter is not majorized by the top-hat (margin {check.margin:.4g})")
        return cls(
            bank_a, bank_b, weights_a.w0 * weights_b.w0, check_a.verdict and check_b.verdict,
            weights_a, weights_b, tuple(notes),
        )

    def frequency_bound(self, cg: CoarseGrained2D, inequality: Inequality | str) -> EntropyBound:
        """Drift-corrected conditional bound, or the sum-variable bound (valid only with w0 = 1)."""
        if Inequality(inequality) == Inequality.CONDITIONAL:
            return conditional_entropy_bound(cg, self.w0, majorization_ok=self.majorization_ok)
        return sum_entropy_bound(
            sum_variable_distribution(cg), majorization_ok=self.majorization_ok and self.w0 >= 1.0,
        )

    def pipeline_margin(self, counts: JointCounts, h_time: EntropyBound, inequality: Inequality | str) -> float:
        cg = counts.to_coarse_grained(self.bank_a, self.bank_b)
        return evaluate_witness(h_time, self.frequency_bound(cg, inequality), inequality).margin


# ── Campaign simulation ───────────────────────────────────────────────────────

@dataclass(frozen=True)
class CampaignConfig:
    """``center_jitter`` is in units of each filter's FWHM; ``width_jitter`` is a relative spread."""
    total_pairs: int
    bank_a: FilterBank
    bank_b: FilterBank
    center_jitter: float = 0.0
    width_jitter: float = 0.0
    rng_seed: int = 0
    background_rate: float = 0.0
    timing: TimingModel | None = None
    histogram_bin_width: float = PICOSECOND
    histogram_span_sigmas: float = 8.0
    histogram_background: float = 0.0
    noiseless: bool = False

    def __post_init__(self):
        if int(self.total_pairs) != self.total_pairs or self.total_pairs <= 0:
            raise ConfigError(f"total_pairs must be a positive integer, got {self.total_pairs!r}")
        if min(self.center_jitter, self.width_jitter, self.background_rate, self.histogram_background) < 0:
            raise ConfigError("jitter magnitudes and background rates must be non-negative")
        if self.width_jitter >= 1:
            raise ConfigError("width jitter must stay below 1")
        if not 0 <= self.rng_seed < 2 ** 64:
            raise ConfigError("rng_seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class CampaignResult:
    counts: JointCounts
    expected: np.ndarray
    bank_a: FilterBank
    bank_b: FilterBank
    histogram: CoincidenceHistogram | None
    coarse: CoarseGrained2D
    rng_algorithm: str = RNG_ALGORITHM
    warnings: tuple[str, ...] = field(default_factory=tuple)


def _jittered_bank(bank: FilterBank, seed: np.random.SeedSequence, center_jitter: float, width_jitter: float) -> FilterBank:
    if center_jitter == 0 and width_jitter == 0:
        return bank
    rng    = np.random.Generator(np.random.PCG64(seed))
    shifts = rng.uniform(-1.0, 1.0, len(bank)) * center_jitter
    scales = 1.0 + rng.uniform(-1.0, 1.0, len(bank)) * width_jitter
    profiles = tuple(
        p.rescaled(scale).shifted(shift * p.fwhm())
        for p, shift, scale in zip(bank.profiles, shifts, scales)
    )
    return FilterBank(profiles, bank.nominal_spacing, bank.nominal_centers, 'simulated')


def simulate_campaign(rho: Grid2D, cfg: CampaignConfig, *, workers: int | None = None) -> CampaignResult:
    """Draw a filter-pair count table (and optionally a timing histogram) for ``rho``.

    Expected counts are N·P(f_m, f_n) on the jitter-realized banks plus the
    accidental rate; observed counts are Poisson draws of those.
    """
    rows     = len(cfg.bank_a)
    children = np.random.SeedSequence(cfg.rng_seed).spawn(3 + rows)
    bank_a   = _jittered_bank(cfg.bank_a, children[0], cfg.center_jitter, cfg.width_jitter)
    bank_b   = _jittered_bank(cfg.bank_b, children[1], cfg.center_jitter, cfg.width_jitter)

    cg       = filter_sample_joint(rho, bank_a, bank_b, workers=workers)
    expected = cfg.total_pairs * cg.probs.p + cfg.background_rate
    if cfg.noiseless:
        counts = expected.copy()
    else:
        def draw(m: int) -> np.ndarray:
            return np.random.Generator(np.random.PCG64(children[3 + m])).poisson(expected[m])
        counts = np.vstack(parallel_map(draw, range(rows), workers))

    histogram = None
    if cfg.timing is not None:
        density  = timing_difference_density(cfg.timing, cfg.histogram_bin_width, cfg.histogram_span_sigmas)
        mean     = CoincidenceHistogram.expected(density, cfg.total_pairs, cfg.histogram_background)
        if cfg.noiseless:
            histogram = mean
        else:
            rng = np.random.Generator(np.random.PCG64(children[2]))
            histogram = CoincidenceHistogram(
                mean.bin_width, mean.t0, rng.poisson(mean.counts), 0.0, ('simulated',),
            )

    logger.info(f"Simulated campaign: {cfg.total_pairs} pairs over {rows}x{len(bank_b)} filter pairs")
    return CampaignResult(JointCounts(counts), expected, bank_a, bank_b, histogram, cg, RNG_ALGORITHM, cg.warnings)


# ── Shot noise ────────────────────────────────────────────────────────────────

class BootstrapResult(NamedTuple):
    margin_point: float
    margin_mean: float
    ci_low: float
    ci_high: float
    n_resamples: int
    warnings: tuple[str, ...]
    excluded: int = 0

    @property
    def ci_width(self) -> float:
        return self.ci_high - self.ci_low


def bootstrap_margin(
    counts: JointCounts,
    evidence: BankEvidence,
    timing: CoincidenceHistogram,
    *,
    n_resamples: int = 200,
    rng_seed: int = 0,
    inequality: Inequality | str = Inequality.CONDITIONAL,
    wing_fraction: float | None = 0.1,
    workers: int | None = None,
) -> BootstrapResult:
    """Poisson-resample both count sets and rerun the margin pipeline each time.

    ``timing`` is the raw histogram; background subtraction is redone per
    resample unless ``wing_fraction`` is None. A resample whose wings fail the
    peak-in-wings rule is excluded and counted. The interval is the 2.5/97.5
    percentile range of the remaining margins.
    """
    if n_resamples < MIN_RESAMPLES:
        raise ConfigError(f"n_resamples must be at least {MIN_RESAMPLES}, got {n_resamples}")

    def margin_of(joint: JointCounts, hist: CoincidenceHistogram) -> float:
        if wing_fraction is not None:
            hist = subtract_background(hist, wing_fraction)
        return evidence.pipeline_margin(joint, timing_entropy_bound(hist), inequality)

    point = margin_of(counts, timing)
    seeds = np.random.SeedSequence(rng_seed).spawn(n_resamples)

    def resample(seed: np.random.SeedSequence) -> float:
        rng   = np.random.Generator(np.random.PCG64(seed))
        joint = JointCounts(rng.poisson(counts.counts))
        hist  = CoincidenceHistogram(timing.bin_width, timing.t0, rng.poisson(timing.counts), 0.0, timing.provenance)
        try:
            return margin_of(joint, hist)
        except PeakInWingsError:
            return math.nan

    margins  = np.array(parallel_map(resample, seeds, workers))
    excluded = int(np.isnan(margins).sum())
    margins  = margins[~np.isnan(margins)]
    if margins.size == 0:
        raise PeakInWingsError(f"all {n_resamples} resamples put the coincidence peak into the wings")

    low, high = np.percentile(margins, [2.5, 97.5])
    mean     = float(margins.mean())
    warnings = []
    if excluded:
        warnings.append(
            f"{excluded} of {n_resamples} resamples excluded: Poisson noise pushed a wing bin "
            f"past {PEAK_IN_WINGS:.0%} of the peak excess"
        )
    if high - low > CI_WARN_FRACTION * abs(mean):
        warnings.append(
            f"bootstrap CI width {high - low:.4f} bits exceeds {CI_WARN_FRACTION:.0%} "
            f"of the margin {mean:+.4f} bits"
        )
    for message in warnings:
        logger.warning(message)
    logger.info(f"Bootstrap over {n_resamples} resamples: margin {mean:+.4f} [{low:+.4f}, {high:+.4f}] bits")
    return BootstrapResult(point, mean, float(low), float(high), n_resamples, tuple(warnings), excluded)


class ShotNoiseComparison(NamedTuple):
    drift_correction_bits: float
    ci_half_width_bits: float
    resolvable: bool


def shot_noise_comparison(counts: JointCounts, w0: float, ci: tuple[float, float]) -> ShotNoiseComparison:
    """Is the drift correction H(A|B)(1/w0 − 1) larger than the shot-noise half-width?

    The certified number always includes the correction; this only says whether
    characterizing filter variation was worth it at this count level.
    """
    if not 0 < w0 <= 1:
        raise ValueError(f"w0 must lie in (0, 1], got {w0!r}")
    correction = conditional_entropy(counts.probabilities(), 'B') * (1.0 / w0 - 1.0)
    half_width = (ci[1] - ci[0]) / 2.0
    return ShotNoiseComparison(float(correction), float(half_width), bool(correction > half_width))
