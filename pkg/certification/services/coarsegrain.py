"""
coarsegrain
===========
Turning a joint spectral density into discrete probabilities, and discrete
entropies back into conservative upper bounds on continuous entropies.

Three regimes:
  - top-hat binning: exact bin integrals of the gridded density
  - fixed-filter sampling: every filter has the same shape and is
    majorized by a top-hat of the bank spacing
  - drifting filters: the conditional entropy is divided by the bank weight w0

A bound is only as good as its majorization precondition, so every
``EntropyBound`` carries an explicit ``valid`` flag supplied by the caller.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
import pandas as pd

from .csv_service import read_comments, read_table, write_table
from .errors import (
    CoverageError,
    IncommensurateBinError,
    SchemaError,
    UnderResolvedError,
)
from .filters import FilterBank, ProfileKind, check_bank
from .parallel import parallel_map
from .probcore import (
    Grid1D,
    Grid2D,
    ProbMatrix,
    ProbVector,
    conditional_entropy,
    joint_entropy,
    marginal,
    shannon_entropy,
)

logger = logging.getLogger(__name__)

POINTS_PER_FWHM   = 20
COVERAGE_ERROR    = 0.99
COVERAGE_WARNING  = 0.999
BIN_TOLERANCE     = 1e-9

COARSE_COLUMNS = ('m_index', 'n_index', 'probability')


class BoundKind(str, Enum):
    JOINT         = 'joint'
    CONDITIONAL   = 'conditional'
    MARGINAL      = 'marginal'
    SUM_VARIABLE  = 'sum_variable'
    DIFF_VARIABLE = 'diff_variable'


@dataclass(frozen=True)
class CoarseGrained1D:
    """Discrete probabilities on bins of width ``bin_width``; bin 0 is centered at ``axis_origin``."""
    probs: ProbVector
    bin_width: float
    axis_origin: float = 0.0
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.bin_width > 0:
            raise IncommensurateBinError(f"bin width must be positive, got {self.bin_width!r}")

    def bin_centers(self) -> np.ndarray:
        return self.axis_origin + self.bin_width * np.arange(len(self.probs))


@dataclass(frozen=True)
class CoarseGrained2D:
    probs: ProbMatrix
    bin_width_a: float
    bin_width_b: float
    origin_a: float = 0.0
    origin_b: float = 0.0
    coverage: float = 1.0
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        if not (self.bin_width_a > 0 and self.bin_width_b > 0):
            raise IncommensurateBinError(
                f"bin widths must be positive, got {self.bin_width_a!r} and {self.bin_width_b!r}"
            )


@dataclass(frozen=True)
class EntropyBound:
    value_bits: float
    kind: BoundKind
    correction_w0: float = 1.0
    valid: bool = True
    provenance: str = ''

    def __post_init__(self):
        object.__setattr__(self, 'kind', BoundKind(self.kind))
        object.__setattr__(self, 'value_bits', float(self.value_bits))
        object.__setattr__(self, 'correction_w0', float(self.correction_w0))
        object.__setattr__(self, 'valid', bool(self.valid))
        if not 0 < self.correction_w0 <= 1:
            raise ValueError(f"correction w0 must lie in (0, 1], got {self.correction_w0!r}")

    def to_dict(self) -> dict:
        return {
            'value_bits':    self.value_bits,
            'kind':          self.kind.value,
            'correction_w0': self.correction_w0,
            'valid':         self.valid,
            'provenance':    self.provenance,
        }


class ConvergenceEntry(NamedTuple):
    spacing: float
    bound_bits: float
    majorization_margin: float
    passes: bool
    change_bits: float | None
    reference_gap_bits: float | None


# ── Top-hat binning ───────────────────────────────────────────────────────────

def _overlap_matrix(cell_edges: np.ndarray, bin_edges: np.ndarray) -> np.ndarray:
    """Fraction of each grid cell (columns) that falls in each bin (rows)."""
    lo = np.maximum.outer(bin_edges[:-1], cell_edges[:-1])
    hi = np.minimum.outer(bin_edges[1:], cell_edges[1:])
    return np.clip(hi - lo, 0.0, None) / np.diff(cell_edges)


def _binning(start: float, step: float, n_cells: int, delta: float, strict: bool) -> tuple[int, np.ndarray | None]:
    """Cells per bin when commensurate, else the overlap matrix."""
    if not (math.isfinite(delta) and delta > 0):
        raise IncommensurateBinError(f"bin width must be positive, got {delta!r}")
    ratio = delta / step
    k = int(round(ratio))
    if k >= 1 and abs(ratio - k) <= BIN_TOLERANCE * max(ratio, 1.0):
        return k, None
    if strict:
        raise IncommensurateBinError(f"bin width {delta!r} is not a multiple of the grid step {step!r}")
    n_bins    = max(1, int(math.ceil(n_cells * step / delta - BIN_TOLERANCE)))
    cell_edges = start + step * np.arange(n_cells + 1)
    bin_edges  = start + delta * np.arange(n_bins + 1)
    return 0, _overlap_matrix(cell_edges, bin_edges)


def _block_sum(masses: np.ndarray, k: int, axis: int) -> np.ndarray:
    pad = [(0, 0)] * masses.ndim
    pad[axis] = (0, (-masses.shape[axis]) % k)
    padded = np.pad(masses, pad)
    shape  = list(padded.shape)
    shape[axis:axis + 1] = [shape[axis] // k, k]
    return padded.reshape(shape).sum(axis=axis + 1)


def tophat_bin(
    g: Grid1D | Grid2D,
    delta: float,
    delta_b: float | None = None,
    *,
    strict: bool = False,
) -> CoarseGrained1D | CoarseGrained2D:
    """Integrate the density over contiguous bins starting at the grid's left edge.

    A bin width that is not a multiple of the grid step is handled by exact
    overlap of the piecewise-constant cells, which is a bin-mean resampling.
    ``strict=True`` refuses it instead.
    """
    if isinstance(g, Grid1D):
        k, overlap = _binning(g.start, g.step, g.size, delta, strict)
        masses = g.cell_masses()
        probs  = _block_sum(masses, k, 0) if overlap is None else overlap @ masses
        return CoarseGrained1D(ProbVector.normalize(probs), float(delta), g.start + delta / 2.0)

    delta_b = delta if delta_b is None else delta_b
    na, nb  = g.shape
    ka, oa  = _binning(g.start_a, g.step_a, na, delta, strict)
    kb, ob  = _binning(g.start_b, g.step_b, nb, delta_b, strict)
    masses  = g.cell_masses()
    masses  = _block_sum(masses, ka, 0) if oa is None else oa @ masses
    masses  = _block_sum(masses, kb, 1) if ob is None else masses @ ob.T
    return CoarseGrained2D(
        ProbMatrix.normalize(masses), float(delta), float(delta_b),
        g.start_a + delta / 2.0, g.start_b + delta_b / 2.0,
    )


# ── Filter sampling ───────────────────────────────────────────────────────────

def _require_resolution(step: float, bank: FilterBank, axis: str) -> None:
    narrowest = bank.narrowest_fwhm
    if step > narrowest / POINTS_PER_FWHM:
        raise UnderResolvedError(
            f"axis {axis}: grid step {step:.4g} exceeds narrowest FWHM {narrowest:.4g} / {POINTS_PER_FWHM}"
        )


def _filter_matrix(bank: FilterBank, edges: np.ndarray, workers: int | None) -> np.ndarray:
    """Row m holds the integral of filter m over every grid cell."""
    rows = parallel_map(lambda p: p.cell_integrals(edges), bank.profiles, workers)
    return np.vstack(rows)


def _coverage_state(coverage: float, what: str) -> tuple[str, ...]:
    if coverage < COVERAGE_ERROR:
        raise CoverageError(f"{what} cover only {coverage:.4f} of the density (need >= {COVERAGE_ERROR})")
    if coverage < COVERAGE_WARNING:
        message = f"{what} cover {coverage:.5f} of the density (below {COVERAGE_WARNING})"
        logger.warning(message)
        return (message,)
    return ()


def filter_sample(g: Grid1D, bank: FilterBank, *, workers: int | None = None) -> CoarseGrained1D:
    _require_resolution(g.step, bank, 'A')
    raw      = _filter_matrix(bank, g.edges(), workers) @ g.values
    coverage = min(1.0, bank.nominal_spacing * float(raw.sum()))
    warnings = _coverage_state(coverage, 'filters')
    return CoarseGrained1D(ProbVector.normalize(raw), bank.nominal_spacing, bank.nominal_centers[0], warnings)


def filter_sample_joint(
    rho: Grid2D,
    bank_a: FilterBank,
    bank_b: FilterBank,
    *,
    workers: int | None = None,
) -> CoarseGrained2D:
    """P(f_m, f_n) ∝ ∬ ρ f_m f_n, exact for a piecewise-constant ρ.

    The grid must resolve the narrowest filter on each axis with at least
    20 points per FWHM. Coverage is Δω_A·Δω_B·ΣP before normalization.
    """
    _require_resolution(rho.step_a, bank_a, 'A')
    _require_resolution(rho.step_b, bank_b, 'B')
    fa  = _filter_matrix(bank_a, rho.edges_a(), workers)
    fb  = _filter_matrix(bank_b, rho.edges_b(), workers)
    raw = fa @ rho.values @ fb.T

    coverage = min(1.0, bank_a.nominal_spacing * bank_b.nominal_spacing * float(raw.sum()))
    warnings = _coverage_state(coverage, 'filter banks')
    logger.info(f"Sampled {raw.shape[0]}x{raw.shape[1]} filter pairs, coverage {coverage:.6f}")
    return CoarseGrained2D(
        ProbMatrix.normalize(raw), bank_a.nominal_spacing, bank_b.nominal_spacing,
        bank_a.nominal_centers[0], bank_b.nominal_centers[0], coverage, warnings,
    )


def discretized_density(cg: CoarseGrained1D) -> Grid1D:
    """Step density P_n/Δ on bin n."""
    return Grid1D.normalize(cg.axis_origin - cg.bin_width / 2.0, cg.bin_width, cg.probs.p / cg.bin_width)


# ── Bounds ────────────────────────────────────────────────────────────────────

def _check_w0(w0: float) -> None:
    if not 0 < w0 <= 1:
        raise ValueError(f"w0 must lie in (0, 1], got {w0!r}")


def conditional_entropy_bound(
    cg: CoarseGrained2D,
    w0: float = 1.0,
    *,
    majorization_ok: bool,
    condition_on: str = 'B',
) -> EntropyBound:
    """H(A|B)/w0 + log₂ΔA (or the A↔B mirror), in bits for SI widths."""
    _check_w0(w0)
    h     = conditional_entropy(cg.probs, condition_on)
    width = cg.bin_width_a if condition_on == 'B' else cg.bin_width_b
    value = h / w0 + math.log2(width)
    subject = 'A|B' if condition_on == 'B' else 'B|A'
    provenance = f"H({subject})={h:.6f} bits / w0={w0:.6f} + log2({width:.6g})"
    return EntropyBound(value, BoundKind.CONDITIONAL, w0, bool(majorization_ok), provenance)


def joint_entropy_bound(cg: CoarseGrained2D, *, majorization_ok: bool) -> EntropyBound:
    """H(A,B) + log₂(ΔAΔB); no drift correction exists for this kind."""
    h = joint_entropy(cg.probs)
    value = h + math.log2(cg.bin_width_a) + math.log2(cg.bin_width_b)
    return EntropyBound(value, BoundKind.JOINT, 1.0, bool(majorization_ok), f"H(A,B)={h:.6f} bits")


def marginal_entropy_bound(cg: CoarseGrained2D, axis: str, *, majorization_ok: bool) -> EntropyBound:
    h     = shannon_entropy(marginal(cg.probs, axis))
    width = cg.bin_width_a if axis == 'A' else cg.bin_width_b
    return EntropyBound(h + math.log2(width), BoundKind.MARGINAL, 1.0, bool(majorization_ok), f"H({axis})={h:.6f} bits")


def _variable_bound(cg: CoarseGrained1D, kind: BoundKind, majorization_ok: bool, label: str) -> EntropyBound:
    h = shannon_entropy(cg.probs)
    return EntropyBound(
        h + math.log2(cg.bin_width), kind, 1.0, bool(majorization_ok),
        f"H({label})={h:.6f} bits + log2({cg.bin_width:.6g})",
    )


def sum_entropy_bound(cg: CoarseGrained1D, *, majorization_ok: bool) -> EntropyBound:
    return _variable_bound(cg, BoundKind.SUM_VARIABLE, majorization_ok, 'A+B')


def diff_entropy_bound(cg: CoarseGrained1D, *, majorization_ok: bool) -> EntropyBound:
    return _variable_bound(cg, BoundKind.DIFF_VARIABLE, majorization_ok, 'A-B')


# ── Sum and difference variables ──────────────────────────────────────────────

def _require_equal_widths(cg: CoarseGrained2D) -> float:
    a, b = cg.bin_width_a, cg.bin_width_b
    if abs(a - b) > BIN_TOLERANCE * max(a, b):
        raise IncommensurateBinError(f"sum/difference variables need equal bin widths, got {a!r} and {b!r}")
    return a


def sum_variable_distribution(cg: CoarseGrained2D) -> CoarseGrained1D:
    """Probabilities of k = m + n; only for data on a rectangular bank grid."""
    width = _require_equal_widths(cg)
    m, n  = np.indices(cg.probs.shape)
    probs = np.bincount((m + n).ravel(), weights=cg.probs.p.ravel(), minlength=sum(cg.probs.shape) - 1)
    return CoarseGrained1D(ProbVector.normalize(probs), width, cg.origin_a + cg.origin_b, cg.warnings)


def diff_variable_distribution(cg: CoarseGrained2D | CoarseGrained1D) -> CoarseGrained1D:
    """Probabilities of k = m − n (index 0 is k = −(N−1)).

    A 1-D input is already a difference histogram and is returned unchanged.
    """
    if isinstance(cg, CoarseGrained1D):
        return cg
    width = _require_equal_widths(cg)
    rows, cols = cg.probs.shape
    m, n  = np.indices(cg.probs.shape)
    probs = np.bincount((m - n + cols - 1).ravel(), weights=cg.probs.p.ravel(), minlength=rows + cols - 1)
    origin = cg.origin_a - cg.origin_b - (cols - 1) * width
    return CoarseGrained1D(ProbVector.normalize(probs), width, origin, cg.warnings)


# ── Convergence under refinement ──────────────────────────────────────────────

def _dimensionless_margin(bank: FilterBank) -> tuple[bool, float]:
    checks = check_bank(bank)
    margins = [
        c.margin * bank.nominal_spacing if p.is_analytic else c.margin
        for c, p in zip(checks, bank.profiles)
    ]
    return all(c.verdict for c in checks), min(margins)


def _is_tophat_family(bank: FilterBank) -> bool:
    return all(
        p.kind == ProfileKind.TOP_HAT and abs(p.width - bank.nominal_spacing) <= BIN_TOLERANCE * p.width
        for p in bank.profiles
    )


def refine_convergence_report(
    rho: Grid2D,
    families: Sequence[tuple[FilterBank, FilterBank]],
    *,
    reference_bits: float | None = None,
    condition_on: str = 'B',
    workers: int | None = None,
) -> list[ConvergenceEntry]:
    """Conditional-entropy bound for each bank pair of a refinement sequence.

    Resolutions whose banks fail the top-hat check are kept and flagged
    (``passes`` is False). Families of top-hats matching their spacing are
    binned exactly instead of sampled.
    """
    if len(families) < 3:
        raise ValueError(f"a convergence report needs at least 3 resolutions, got {len(families)}")

    entries, previous = [], None
    for bank_a, bank_b in families:
        ok_a, margin_a = _dimensionless_margin(bank_a)
        ok_b, margin_b = _dimensionless_margin(bank_b)
        passes = ok_a and ok_b
        if _is_tophat_family(bank_a) and _is_tophat_family(bank_b):
            cg = tophat_bin(rho, bank_a.nominal_spacing, bank_b.nominal_spacing)
        else:
            cg = filter_sample_joint(rho, bank_a, bank_b, workers=workers)
        bound = conditional_entropy_bound(cg, majorization_ok=passes, condition_on=condition_on).value_bits
        if not passes:
            logger.warning(f"❌ Spacing {bank_a.nominal_spacing:.4g}: filters fail the top-hat check")
        entries.append(ConvergenceEntry(
            spacing=bank_a.nominal_spacing,
            bound_bits=bound,
            majorization_margin=min(margin_a, margin_b),
            passes=passes,
            change_bits=None if previous is None else bound - previous,
            reference_gap_bits=None if reference_bits is None else bound - reference_bits,
        ))
        previous = bound
    return entries


# ── Files ─────────────────────────────────────────────────────────────────────

def save_coarse_grained_csv(cg: CoarseGrained2D, path: str | Path, digest: str | None = None) -> Path:
    m, n = np.indices(cg.probs.shape)
    frame = pd.DataFrame({
        'm_index':     m.ravel(),
        'n_index':     n.ravel(),
        'probability': cg.probs.p.ravel(),
    })
    comments = {
        'bin_width_a_rad_per_s': float(cg.bin_width_a),
        'bin_width_b_rad_per_s': float(cg.bin_width_b),
        'origin_a_rad_per_s':    float(cg.origin_a),
        'origin_b_rad_per_s':    float(cg.origin_b),
    }
    return write_table(path, frame, digest, comments)


def load_coarse_grained_csv(path: str | Path) -> CoarseGrained2D:
    meta  = read_comments(path)
    frame = read_table(path, COARSE_COLUMNS, integer_columns=('m_index', 'n_index'),
                       non_negative=COARSE_COLUMNS)
    try:
        widths  = float(meta['bin_width_a_rad_per_s']), float(meta['bin_width_b_rad_per_s'])
        origins = float(meta.get('origin_a_rad_per_s', 0.0)), float(meta.get('origin_b_rad_per_s', 0.0))
    except (KeyError, ValueError) as exc:
        raise SchemaError(f"{path}: missing bin width comment lines") from exc
    m = frame['m_index'].to_numpy(dtype=int)
    n = frame['n_index'].to_numpy(dtype=int)
    table = np.zeros((m.max() + 1, n.max() + 1))
    np.add.at(table, (m, n), frame['probability'].to_numpy())
    return CoarseGrained2D(ProbMatrix.normalize(table), *widths, *origins)
