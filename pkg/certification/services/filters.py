"""
filters
=======
Normalized filter transmission profiles, the filter-versus-top-hat
majorization check, and drift weights for banks whose filters are not all
identical.

Angular frequencies are in rad/s throughout. A profile is a probability
density in ω: it integrates to 1 and its peak has units of 1/(rad/s).
"""
import json
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
import pandas as pd
from scipy.integrate import simpson, trapezoid
from scipy.optimize import brentq, minimize_scalar
from scipy.special import ndtr, voigt_profile

from .csv_service import read_table, write_table
from .errors import (
    DegenerateRatioError,
    InvalidBankError,
    InvalidDistributionError,
    SchemaError,
    UnsupportedProfileError,
)
from .parallel import parallel_map
from .probcore import DominanceCurve, Grid1D, dominance_curve

logger = logging.getLogger(__name__)

SQRT_2PI   = math.sqrt(2.0 * math.pi)
GAUSS_FWHM = 2.0 * math.sqrt(2.0 * math.log(2.0))

DEFAULT_SEARCH_WINDOW = 50.0
DEFAULT_SEARCH_POINTS = 100_001
DEFAULT_WEIGHT_FLOOR  = 1e-3
DEFAULT_CLIP_FRACTION = 1e-6

PROFILE_COLUMNS = ('omega_rad_per_s', 'transmission')


class ProfileKind(str, Enum):
    TOP_HAT    = 'top_hat'
    LORENTZIAN = 'lorentzian'
    GAUSSIAN   = 'gaussian'
    VOIGT      = 'voigt'
    TABULATED  = 'tabulated'


ANALYTIC_KINDS = (ProfileKind.TOP_HAT, ProfileKind.LORENTZIAN, ProfileKind.GAUSSIAN, ProfileKind.VOIGT)


# ── Profiles ──────────────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class FilterProfile:
    """One filter transmission, normalized to unit area.

    ``width`` is the top-hat width Δ, the Lorentzian FWHM a, the Gaussian σ or
    the Lorentzian FWHM of a Voigt (whose Gaussian σ is ``sigma_gauss``).
    Tabulated profiles hold ``offsets`` relative to ``center`` and linearly
    interpolated ``values``. When ``tail`` is set, a tabulated profile is
    continued beyond its table as ``tail / x²``.
    """
    kind: ProfileKind
    center: float = 0.0
    width: float = 0.0
    sigma_gauss: float = 0.0
    offsets: np.ndarray | None = field(default=None, repr=False)
    values: np.ndarray | None = field(default=None, repr=False)
    tail: float | None = None

    def __post_init__(self):
        object.__setattr__(self, 'kind', ProfileKind(self.kind))
        object.__setattr__(self, 'center', float(self.center))
        if not math.isfinite(self.center):
            raise InvalidDistributionError("filter center must be finite")
        if self.kind == ProfileKind.TABULATED:
            if self.offsets is None or self.values is None:
                raise InvalidDistributionError("tabulated profile needs offsets and values")
            for name in ('offsets', 'values'):
                arr = np.array(getattr(self, name), dtype=float)
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)
            if np.any(self.values < 0):
                raise InvalidDistributionError("tabulated transmission must be non-negative")
        elif self.kind == ProfileKind.VOIGT:
            if self.width < 0 or self.sigma_gauss < 0 or (self.width == 0 and self.sigma_gauss == 0):
                raise InvalidDistributionError(
                    f"voigt needs fwhm_lorentz >= 0 and sigma_gauss >= 0, not both zero "
                    f"(got {self.width}, {self.sigma_gauss})"
                )
        elif not (math.isfinite(self.width) and self.width > 0):
            raise InvalidDistributionError(f"{self.kind.value} width must be positive, got {self.width!r}")

    # ── constructors ──

    @classmethod
    def top_hat(cls, width: float, center: float = 0.0) -> 'FilterProfile':
        return cls(ProfileKind.TOP_HAT, center, float(width))

    @classmethod
    def lorentzian(cls, fwhm: float, center: float = 0.0) -> 'FilterProfile':
        return cls(ProfileKind.LORENTZIAN, center, float(fwhm))

    @classmethod
    def gaussian(cls, sigma: float, center: float = 0.0) -> 'FilterProfile':
        return cls(ProfileKind.GAUSSIAN, center, float(sigma))

    @classmethod
    def voigt(cls, fwhm_lorentz: float, sigma_gauss: float, center: float = 0.0) -> 'FilterProfile':
        return cls(ProfileKind.VOIGT, center, float(fwhm_lorentz), float(sigma_gauss))

    @classmethod
    def tabulated(
        cls,
        offsets: Sequence[float],
        values: Sequence[float],
        center: float = 0.0,
        *,
        clip_fraction: float = DEFAULT_CLIP_FRACTION,
        normalize: bool = True,
        tail: float | None = None,
    ) -> 'FilterProfile':
        """Build a measured profile; values below ``clip_fraction`` of the peak are zeroed."""
        x = np.asarray(offsets, dtype=float)
        y = np.asarray(values, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or x.size < 2:
            raise SchemaError("tabulated profile needs two equal-length columns with at least 2 rows")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise SchemaError("tabulated profile contains non-finite values")
        if np.any(np.diff(x) <= 0):
            raise SchemaError("tabulated frequencies must be strictly increasing")
        peak = float(y.max())
        if peak <= 0:
            raise InvalidDistributionError("tabulated profile has no positive transmission")
        y = np.where(y < clip_fraction * peak, 0.0, y)
        if tail is not None and not (x[0] < 0 < x[-1]):
            tail = None
        if normalize:
            area = float(trapezoid(y, x))
            if tail is not None:
                area += tail / abs(x[0]) + tail / x[-1]
            y = y / area
            tail = tail / area if tail is not None else None
        return cls(ProfileKind.TABULATED, center, offsets=x, values=y, tail=tail)

    # ── geometry ──

    @property
    def is_analytic(self) -> bool:
        return self.kind in ANALYTIC_KINDS

    @property
    def location(self) -> float:
        """Peak position: ``center`` for analytic kinds, the table maximum otherwise."""
        if self.kind == ProfileKind.TABULATED:
            return self.center + float(self.offsets[int(np.argmax(self.values))])
        return self.center

    @property
    def tail_coefficient(self) -> float | None:
        """Constant c of a c/ω² tail, or None for faster-decaying profiles."""
        if self.kind == ProfileKind.LORENTZIAN:
            return self.width / (2.0 * math.pi)
        if self.kind == ProfileKind.VOIGT and self.width > 0:
            return self.width / (2.0 * math.pi)
        if self.kind == ProfileKind.TABULATED:
            return self.tail
        return None

    def shifted(self, delta: float) -> 'FilterProfile':
        return replace(self, center=self.center + delta)

    def rescaled(self, factor: float) -> 'FilterProfile':
        """Stretch the profile about its center by ``factor`` (area preserved)."""
        if factor <= 0:
            raise ValueError("rescale factor must be positive")
        if self.kind == ProfileKind.TABULATED:
            return replace(
                self,
                offsets=self.offsets * factor,
                values=self.values / factor,
                tail=self.tail * factor if self.tail is not None else None,
            )
        return replace(self, width=self.width * factor, sigma_gauss=self.sigma_gauss * factor)

    # ── evaluation ──

    def _density(self, x: np.ndarray) -> np.ndarray:
        kind = self.kind
        if kind == ProfileKind.TOP_HAT:
            return np.where(np.abs(x) <= self.width / 2.0, 1.0 / self.width, 0.0)
        if kind == ProfileKind.LORENTZIAN:
            a = self.width
            return (a / (2.0 * math.pi)) / (x * x + a * a / 4.0)
        if kind == ProfileKind.GAUSSIAN:
            s = self.width
            return np.exp(-0.5 * (x / s) ** 2) / (s * SQRT_2PI)
        if kind == ProfileKind.VOIGT:
            return voigt_profile(x, self.sigma_gauss, self.width / 2.0)
        inside = np.interp(x, self.offsets, self.values, left=0.0, right=0.0)
        if self.tail is None:
            return inside
        outside = (x < self.offsets[0]) | (x > self.offsets[-1])
        with np.errstate(divide='ignore'):
            return np.where(outside, self.tail / np.maximum(x * x, 1e-300), inside)

    def evaluate(self, omega):
        x   = np.asarray(omega, dtype=float) - self.center
        out = self._density(x)
        return float(out) if np.ndim(omega) == 0 else out

    def _cdf(self, x: np.ndarray) -> np.ndarray | None:
        if self.kind == ProfileKind.TOP_HAT:
            return np.clip((x + self.width / 2.0) / self.width, 0.0, 1.0)
        if self.kind == ProfileKind.LORENTZIAN:
            return 0.5 + np.arctan(2.0 * x / self.width) / math.pi
        if self.kind == ProfileKind.GAUSSIAN:
            return ndtr(x / self.width)
        return None

    def peak(self) -> float:
        if self.kind == ProfileKind.TOP_HAT:
            return 1.0 / self.width
        if self.kind == ProfileKind.LORENTZIAN:
            return 2.0 / (math.pi * self.width)
        if self.kind == ProfileKind.GAUSSIAN:
            return 1.0 / (self.width * SQRT_2PI)
        if self.kind == ProfileKind.VOIGT:
            return float(voigt_profile(0.0, self.sigma_gauss, self.width / 2.0))
        return float(self.values.max())

    def fwhm(self) -> float:
        if self.kind in (ProfileKind.TOP_HAT, ProfileKind.LORENTZIAN):
            return self.width
        if self.kind == ProfileKind.GAUSSIAN:
            return GAUSS_FWHM * self.width
        half = self.peak() / 2.0
        if self.kind == ProfileKind.VOIGT:
            hi = self.width + GAUSS_FWHM * self.sigma_gauss
            return 2.0 * brentq(lambda x: self._density(np.asarray(x)) - half, 0.0, hi)
        x, y  = self.offsets, self.values
        above = np.flatnonzero(y >= half)
        i, j  = above[0], above[-1]
        left  = x[i] if i == 0 else np.interp(half, [y[i - 1], y[i]], [x[i - 1], x[i]])
        right = x[j] if j == y.size - 1 else np.interp(half, [y[j + 1], y[j]], [x[j + 1], x[j]])
        return float(right - left)

    def mass(self, lo: float, hi: float) -> float:
        """Integral of the profile over [lo, hi] (closed form where a CDF exists)."""
        if hi <= lo:
            return 0.0
        cdf = self._cdf(np.array([lo, hi]) - self.center)
        if cdf is not None:
            return float(cdf[1] - cdf[0])
        loc   = self.location
        reach = 1e4 * self.fwhm()
        c     = self.tail_coefficient or 0.0
        extra = 0.0
        if not math.isfinite(lo) or lo < loc - reach:
            extra += c / reach if not math.isfinite(lo) else 0.0
            lo = max(lo, loc - reach)
        if not math.isfinite(hi) or hi > loc + reach:
            extra += c / reach if not math.isfinite(hi) else 0.0
            hi = min(hi, loc + reach)
        # Dense core around the peak, coarse out to the reach.
        core = np.clip(loc + self.fwhm() * np.linspace(-50.0, 50.0, 20_001), lo, hi)
        grid = np.unique(np.concatenate((np.linspace(lo, hi, 20_001), core)))
        return float(simpson(self.evaluate(grid), x=grid)) + extra

    def cell_integrals(self, edges: np.ndarray) -> np.ndarray:
        """Per-cell integrals over consecutive ``edges``."""
        edges = np.asarray(edges, dtype=float)
        cdf   = self._cdf(edges - self.center)
        if cdf is not None:
            return np.diff(cdf)
        mids = 0.5 * (edges[:-1] + edges[1:])
        f_e  = self.evaluate(edges)
        return np.diff(edges) / 6.0 * (f_e[:-1] + 4.0 * self.evaluate(mids) + f_e[1:])

    # ── serialisation ──

    def to_dict(self) -> dict:
        data = {'kind': self.kind.value, 'center_rad_per_s': self.center}
        if self.kind == ProfileKind.TOP_HAT:
            data['width_rad_per_s'] = self.width
        elif self.kind == ProfileKind.LORENTZIAN:
            data['fwhm_rad_per_s'] = self.width
        elif self.kind == ProfileKind.GAUSSIAN:
            data['sigma_rad_per_s'] = self.width
        elif self.kind == ProfileKind.VOIGT:
            data['fwhm_rad_per_s']  = self.width
            data['sigma_rad_per_s'] = self.sigma_gauss
        return data

    @classmethod
    def from_dict(cls, data: dict) -> 'FilterProfile':
        try:
            kind   = ProfileKind(data['kind'])
            center = float(data.get('center_rad_per_s', 0.0))
            if kind == ProfileKind.TOP_HAT:
                return cls.top_hat(data['width_rad_per_s'], center)
            if kind == ProfileKind.LORENTZIAN:
                return cls.lorentzian(data['fwhm_rad_per_s'], center)
            if kind == ProfileKind.GAUSSIAN:
                return cls.gaussian(data['sigma_rad_per_s'], center)
            if kind == ProfileKind.VOIGT:
                return cls.voigt(data['fwhm_rad_per_s'], data['sigma_rad_per_s'], center)
        except (KeyError, ValueError, TypeError) as exc:
            raise SchemaError(f"bad filter entry {data!r}: {exc}") from exc
        raise SchemaError("tabulated filters must be given as a csv path")


# ── Banks ─────────────────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class FilterBank:
    profiles: tuple[FilterProfile, ...]
    nominal_spacing: float
    nominal_centers: tuple[float, ...]
    origin: str = 'analytic'

    def __post_init__(self):
        object.__setattr__(self, 'profiles', tuple(self.profiles))
        object.__setattr__(self, 'nominal_centers', tuple(float(c) for c in self.nominal_centers))
        if len(self.profiles) != len(self.nominal_centers):
            raise InvalidBankError(
                f"{len(self.profiles)} profiles but {len(self.nominal_centers)} nominal centers"
            )
        if not (math.isfinite(self.nominal_spacing) and self.nominal_spacing > 0):
            raise InvalidBankError(f"nominal spacing must be positive, got {self.nominal_spacing!r}")
        locations = np.array([p.location for p in self.profiles])
        if locations.size > 1 and np.any(np.diff(locations) <= 0):
            raise InvalidBankError("filter centers must be strictly increasing")

    @classmethod
    def uniform(
        cls,
        kind: ProfileKind | str,
        count: int,
        spacing: float,
        first_center: float,
        width: float,
        *,
        sigma_gauss: float = 0.0,
        offsets: Sequence[float] | None = None,
        widths: Sequence[float] | None = None,
        origin: str = 'analytic',
    ) -> 'FilterBank':
        """``count`` filters at ``first_center + n·spacing`` (plus optional per-filter offsets)."""
        kind = ProfileKind(kind)
        if kind == ProfileKind.TABULATED:
            raise UnsupportedProfileError("uniform banks are built from analytic profiles")
        nominal  = first_center + spacing * np.arange(count)
        offsets  = np.zeros(count) if offsets is None else np.asarray(offsets, dtype=float)
        widths   = np.full(count, width) if widths is None else np.asarray(widths, dtype=float)
        profiles = [
            FilterProfile(kind, nominal[n] + offsets[n], widths[n], sigma_gauss)
            for n in range(count)
        ]
        return cls(tuple(profiles), float(spacing), tuple(nominal), origin)

    def __len__(self) -> int:
        return len(self.profiles)

    def __iter__(self):
        return iter(self.profiles)

    @property
    def centers(self) -> np.ndarray:
        return np.array([p.location for p in self.profiles])

    @property
    def offsets(self) -> np.ndarray:
        """Per-filter δ_n: actual minus nominal center."""
        return self.centers - np.asarray(self.nominal_centers)

    @property
    def narrowest_fwhm(self) -> float:
        return min(p.fwhm() for p in self.profiles)

    def aligned(self, n: int) -> FilterProfile:
        """Filter n moved so that its nominal center sits at 0."""
        return self.profiles[n].shifted(-self.nominal_centers[n])


class WeightReport(NamedTuple):
    per_filter_w: tuple[float, ...]
    w0: float
    target_profile: FilterProfile
    argmin: int
    arm: str | None = None


class TopHatCheck(NamedTuple):
    verdict: bool
    margin: float


class DecompositionCheck(NamedTuple):
    min_value: float
    integral: float
    passes: bool
    skipped: bool = False


# ── Case 1: comparison with a top-hat of the bank spacing ─────────────────────

def _tabulated_dominance_slack(f: FilterProfile, spacing: float) -> float:
    lo, hi = float(f.offsets[0]), float(f.offsets[-1])
    n      = max(4 * f.offsets.size, 20_001)
    step   = (hi - lo) / n
    mids   = lo + (np.arange(n) + 0.5) * step
    dens   = np.sort(np.interp(mids, f.offsets, f.values))[::-1]
    s      = np.arange(1, n + 1) * step
    curve  = np.cumsum(dens) * step
    curve *= float(trapezoid(f.values, f.offsets)) / curve[-1]
    return float(np.min(np.minimum(s / spacing, 1.0) - curve))


def majorized_by_tophat(f: FilterProfile, spacing: float) -> TopHatCheck:
    """Whether ``f`` is majorized by a top-hat of width ``spacing``.

    Analytic kinds are unimodal, so the test reduces to the peak height and
    ``margin`` is 1/spacing − peak (density units). Tabulated profiles are
    compared through their full dominance curve and ``margin`` is the minimal
    curve slack (a probability).
    """
    if not spacing > 0:
        raise ValueError(f"filter spacing must be positive, got {spacing!r}")
    if f.is_analytic:
        margin = 1.0 / spacing - f.peak()
        return TopHatCheck(bool(margin >= -1e-12 / spacing), float(margin))
    slack = _tabulated_dominance_slack(f, spacing)
    return TopHatCheck(bool(slack >= -1e-9), float(slack))


def check_bank(bank: FilterBank) -> list[TopHatCheck]:
    return [majorized_by_tophat(p, bank.nominal_spacing) for p in bank.profiles]


def profile_dominance_curve(f: FilterProfile, *, reach: float = 20.0, points: int = 4000) -> DominanceCurve:
    """Dominance curve of ``f`` sampled over ±``reach`` FWHM around its peak."""
    half = reach * f.fwhm()
    lo   = f.location - half
    grid = Grid1D.from_function(f.evaluate, lo, f.location + half, 2.0 * half / points)
    return dominance_curve(grid)


def tophat_dominance_curve(spacing: float, measure: np.ndarray) -> DominanceCurve:
    measure = np.asarray(measure, dtype=float)
    return DominanceCurve(measure, np.minimum(measure / spacing, 1.0))


def min_width_for_spacing(kind: ProfileKind | str, spacing: float, sigma_gauss: float = 0.0) -> float:
    """Smallest width parameter whose peak equals 1/spacing.

    Lorentzian and Voigt return a Lorentzian FWHM (for Voigt at the given
    ``sigma_gauss``), Gaussian returns σ and top-hat its full width.
    """
    kind = ProfileKind(kind)
    if not spacing > 0:
        raise ValueError(f"filter spacing must be positive, got {spacing!r}")
    if kind == ProfileKind.LORENTZIAN:
        return 2.0 * spacing / math.pi
    if kind == ProfileKind.GAUSSIAN:
        return spacing / SQRT_2PI
    if kind == ProfileKind.TOP_HAT:
        return spacing
    if kind == ProfileKind.VOIGT:
        limit = 1.0 / spacing
        if sigma_gauss > 0 and 1.0 / (sigma_gauss * SQRT_2PI) <= limit:
            return 0.0

        def excess(a: float) -> float:
            return float(voigt_profile(0.0, sigma_gauss, a / 2.0)) - limit

        return brentq(excess, spacing * 1e-12, spacing, xtol=spacing * 1e-14)
    raise UnsupportedProfileError("tabulated profiles have no width parameter; use majorized_by_tophat")


# ── Case 2: drift weights ─────────────────────────────────────────────────────

def lorentzian_width_weight(eps: float) -> float:
    """Exact weight of a Lorentzian of FWHM a(1+eps) against one of FWHM a."""
    return min(1.0 / (1.0 + eps), 1.0 + eps)


def lorentzian_shift_weight(delta: float) -> float:
    """Exact weight of a Lorentzian displaced by ``delta`` half-widths from an equal one."""
    d = abs(delta)
    return 1.0 + d * d / 2.0 - d * math.sqrt(1.0 + d * d / 4.0)


def linearized_shift_weight(delta: float) -> float:
    return 1.0 - abs(delta)


def _same_shape(profiles: Sequence[FilterProfile]) -> bool:
    first = profiles[0]
    if not first.is_analytic:
        return False
    return all(
        p.kind == first.kind and p.center == first.center
        and p.width == first.width and p.sigma_gauss == first.sigma_gauss
        for p in profiles[1:]
    )


def mean_filter(
    bank: FilterBank,
    *,
    window: float = DEFAULT_SEARCH_WINDOW,
    points: int = DEFAULT_SEARCH_POINTS,
) -> FilterProfile:
    """Pointwise mean of all filters after moving each nominal center to 0.

    A bank of identical analytic filters returns that filter itself. Otherwise
    the mean is tabulated over ±``window`` of the widest FWHM; members with
    ω⁻² tails hand their mean tail coefficient to the table.
    """
    if len(bank) == 0:
        raise InvalidBankError("mean filter of an empty bank")
    aligned = [bank.aligned(n) for n in range(len(bank))]
    if _same_shape(aligned):
        return aligned[0]

    reach   = window * max(p.fwhm() for p in aligned) + float(np.max(np.abs(bank.offsets)))
    offsets = np.linspace(-reach, reach, points)
    values  = np.mean([p.evaluate(offsets) for p in aligned], axis=0)

    tails = [p.tail_coefficient for p in aligned]
    tail  = float(np.mean(tails)) if all(t is not None for t in tails) else None
    measured = any(not p.is_analytic for p in aligned)
    return FilterProfile.tabulated(offsets, values, 0.0, clip_fraction=0.0, normalize=measured, tail=tail)


def _search_grid(target: FilterProfile, window: float, points: int) -> np.ndarray:
    half = window * target.fwhm()
    loc  = target.location
    return np.linspace(loc - half, loc + half, points)


def _min_ratio(f_n: FilterProfile, target: FilterProfile, grid: np.ndarray, target_values: np.ndarray) -> float:
    positive = target_values > 0
    if not positive.any():
        raise DegenerateRatioError("target filter vanishes on the whole search window")
    safe  = np.where(positive, target_values, 1.0)
    ratio = np.where(positive, f_n.evaluate(grid) / safe, np.inf)
    k     = int(np.argmin(ratio))
    best  = float(ratio[k])

    if 0 < k < grid.size - 1:
        def objective(x: float) -> float:
            t = target.evaluate(x)
            return f_n.evaluate(x) / t if t > 0 else math.inf

        step   = grid[1] - grid[0]
        result = minimize_scalar(
            objective, bounds=(grid[k - 1], grid[k + 1]), method='bounded',
            options={'xatol': step * 1e-6},
        )
        if math.isfinite(result.fun):
            best = min(best, float(result.fun))

    c_n, c = f_n.tail_coefficient, target.tail_coefficient
    if c_n is not None and c is not None:
        best = min(best, c_n / c)
    return best


def _checked_weight(raw: float, floor: float) -> float:
    w = min(raw, 1.0)
    if not w >= floor or w <= 0:
        raise DegenerateRatioError(f"weight {w:.3e} is below the floor {floor:.1e}")
    return w


def filter_weight(
    f_n: FilterProfile,
    target: FilterProfile,
    search_window: float = DEFAULT_SEARCH_WINDOW,
    *,
    points: int = DEFAULT_SEARCH_POINTS,
    floor: float = DEFAULT_WEIGHT_FLOOR,
) -> float:
    """w_n = min over ω of f_n(ω)/target(ω), clamped to (0, 1].

    The minimum is searched on ±``search_window`` target FWHM and refined
    between the neighbours of the best grid node. For two ω⁻²-tailed profiles
    the ratio of tail coefficients (the ω → ±∞ limit) also competes.
    """
    grid = _search_grid(target, search_window, points)
    return _checked_weight(_min_ratio(f_n, target, grid, target.evaluate(grid)), floor)


def bank_weights(
    bank: FilterBank,
    *,
    search_window: float = DEFAULT_SEARCH_WINDOW,
    points: int = DEFAULT_SEARCH_POINTS,
    floor: float = DEFAULT_WEIGHT_FLOOR,
    arm: str | None = None,
    workers: int | None = None,
) -> WeightReport:
    target = mean_filter(bank, window=search_window, points=points)
    grid   = _search_grid(target, search_window, points)
    values = target.evaluate(grid)

    def weigh(n: int) -> float:
        try:
            return _checked_weight(_min_ratio(bank.aligned(n), target, grid, values), floor)
        except DegenerateRatioError as exc:
            label = f"arm {arm} " if arm else ""
            raise DegenerateRatioError(f"{label}filter {n}: {exc}", filter_index=n, arm=arm) from exc

    weights = parallel_map(weigh, range(len(bank)), workers)
    argmin  = int(np.argmin(weights))
    logger.info(f"Bank {arm or ''} weights: w0 = {weights[argmin]:.6f} at filter {argmin} of {len(bank)}")
    return WeightReport(tuple(weights), float(weights[argmin]), target, argmin, arm)


def _outside_mass(p: FilterProfile, lo: float, hi: float) -> float:
    if p._cdf(np.zeros(1)) is not None:
        return 1.0 - p.mass(lo, hi)
    c = p.tail_coefficient
    if c is None:
        return 0.0
    return c / abs(lo - p.center) + c / abs(hi - p.center)


def decomposition_check(
    f_n: FilterProfile,
    target: FilterProfile,
    w: float,
    search_window: float = DEFAULT_SEARCH_WINDOW,
    *,
    points: int = DEFAULT_SEARCH_POINTS,
) -> DecompositionCheck:
    """Check that φ = (f_n − w·target)/(1 − w) is a density.

    Its minimum on the window must be non-negative and its integral must be 1
    within 1e-6 (inner part by Simpson, outer part from CDFs or ω⁻² tails).
    """
    if w >= 1.0:
        return DecompositionCheck(0.0, 1.0, True, skipped=True)
    grid  = _search_grid(target, search_window, points)
    phi   = (f_n.evaluate(grid) - w * target.evaluate(grid)) / (1.0 - w)
    lo, hi = float(grid[0]), float(grid[-1])
    outer = (_outside_mass(f_n, lo, hi) - w * _outside_mass(target, lo, hi)) / (1.0 - w)
    integral  = float(simpson(phi, x=grid)) + outer
    min_value = float(phi.min())
    passes = min_value >= -1e-9 * float(phi.max()) and abs(integral - 1.0) <= 1e-6
    return DecompositionCheck(min_value, integral, passes)


# ── Files ─────────────────────────────────────────────────────────────────────

def load_profile_csv(path: str | Path, *, clip_fraction: float = DEFAULT_CLIP_FRACTION) -> FilterProfile:
    """Measured transmission vs absolute ω, normalized by trapezoid."""
    frame = read_table(path, PROFILE_COLUMNS)
    if len(frame) < 2:
        raise SchemaError(f"{path}: a filter profile needs at least two rows")
    return FilterProfile.tabulated(
        frame['omega_rad_per_s'].to_numpy(), frame['transmission'].to_numpy(),
        0.0, clip_fraction=clip_fraction,
    )


def load_bank_manifest(path: str | Path, *, clip_fraction: float = DEFAULT_CLIP_FRACTION) -> FilterBank:
    """Bank manifest JSON: nominal spacing plus one entry per filter.

    Each entry has ``nominal_center_rad_per_s`` and either a ``csv`` path
    (relative to the manifest) or an analytic profile description.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding='utf-8'))
    except FileNotFoundError as exc:
        raise SchemaError(f"{path}: file not found") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: {exc.msg}", line=exc.lineno) from exc

    try:
        spacing = float(data['nominal_spacing_rad_per_s'])
        entries = data['filters']
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: needs nominal_spacing_rad_per_s and filters") from exc

    profiles, nominal = [], []
    for entry in entries:
        if 'nominal_center_rad_per_s' not in entry:
            raise SchemaError(f"{path}: filter entry without nominal_center_rad_per_s")
        nominal.append(float(entry['nominal_center_rad_per_s']))
        if 'csv' in entry:
            profiles.append(load_profile_csv(path.parent / entry['csv'], clip_fraction=clip_fraction))
        else:
            profiles.append(FilterProfile.from_dict(entry))
    logger.info(f"Loaded bank of {len(profiles)} filters from {path}")
    return FilterBank(tuple(profiles), spacing, tuple(nominal), data.get('origin', f"manifest:{path.name}"))


def save_bank_manifest(bank: FilterBank, path: str | Path, digest: str | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    filters = []
    for n, (profile, nominal) in enumerate(zip(bank.profiles, bank.nominal_centers)):
        if profile.is_analytic:
            entry = profile.to_dict()
        else:
            csv_name = f"{path.stem}_filter_{n:04d}.csv"
            frame = pd.DataFrame({
                PROFILE_COLUMNS[0]: profile.center + profile.offsets,
                PROFILE_COLUMNS[1]: profile.values,
            })
            write_table(path.parent / csv_name, frame, digest)
            entry = {'csv': csv_name}
        entry['nominal_center_rad_per_s'] = nominal
        filters.append(entry)
    data = {
        'nominal_spacing_rad_per_s': bank.nominal_spacing,
        'origin': bank.origin,
        'filters': filters,
    }
    if digest:
        data['manifest_digest'] = digest
    path.write_text(json.dumps(data, indent=2), encoding='utf-8')
    logger.info(f"📄 Wrote bank manifest {path} ({len(bank)} filters)")
    return path
