"""
probcore
========
Probability containers, base-2 entropies and majorization tests.

Every conservativeness guarantee in the other services reduces to two facts
checked here: mixing (a doubly-stochastic map) never lowers an entropy, and a
coarse-grained density is majorized by the density it came from.

Conventions:
  - entropies are in bits; continuous entropies are relative to SI units and
    may be negative
  - 0·log 0 is 0 by explicit masking, never by evaluating a limit
  - inputs outside tolerance are rejected; only the ``normalize`` constructors
    rescale
  - grids are uniform; cell i of a 1-D grid is [start + i·step, start + (i+1)·step)
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Literal, NamedTuple, Sequence

import numpy as np

from .errors import DimensionMismatchError, InvalidDistributionError, OperatorError

logger = logging.getLogger(__name__)

DISCRETE_TOL       = 1e-12
GRID_TOL           = 1e-9
MAJORIZATION_SLACK = 1e-12

Axis = Literal['A', 'B']


def _readonly(values, ndim: int, what: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != ndim:
        raise InvalidDistributionError(f"{what} must be {ndim}-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise InvalidDistributionError(f"{what} is empty")
    if not np.all(np.isfinite(arr)):
        raise InvalidDistributionError(f"{what} contains non-finite entries")
    if np.any(arr < 0):
        raise InvalidDistributionError(f"{what} has a negative entry ({arr.min():.3e})")
    arr.setflags(write=False)
    return arr


def _check_axis(axis: str) -> None:
    if axis not in ('A', 'B'):
        raise ValueError(f"axis must be 'A' or 'B', got {axis!r}")


# ── Discrete containers ───────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class ProbVector:
    p: np.ndarray

    def __post_init__(self):
        arr   = _readonly(self.p, 1, 'probability vector')
        total = float(arr.sum())
        if abs(total - 1.0) > DISCRETE_TOL:
            raise InvalidDistributionError(f"probabilities sum to {total!r}, not 1")
        object.__setattr__(self, 'p', arr)

    @classmethod
    def normalize(cls, values) -> 'ProbVector':
        arr   = _readonly(values, 1, 'weights')
        total = float(arr.sum())
        if total <= 0:
            raise InvalidDistributionError("cannot normalize weights with zero total")
        return cls(arr / total)

    def __len__(self) -> int:
        return self.p.size


@dataclass(frozen=True, eq=False)
class ProbMatrix:
    """Joint probabilities; rows index outcome A (m), columns outcome B (n)."""
    p: np.ndarray

    def __post_init__(self):
        arr   = _readonly(self.p, 2, 'probability matrix')
        total = float(arr.sum())
        if abs(total - 1.0) > DISCRETE_TOL:
            raise InvalidDistributionError(f"joint probabilities sum to {total!r}, not 1")
        object.__setattr__(self, 'p', arr)

    @classmethod
    def normalize(cls, values) -> 'ProbMatrix':
        arr   = _readonly(values, 2, 'joint weights')
        total = float(arr.sum())
        if total <= 0:
            raise InvalidDistributionError("cannot normalize joint weights with zero total")
        return cls(arr / total)

    @property
    def shape(self) -> tuple[int, int]:
        return self.p.shape


@dataclass(frozen=True, eq=False)
class DoublyStochasticOp:
    """Transition weights applied as ``out = T @ p``."""
    T: np.ndarray

    def __post_init__(self):
        arr = np.array(self.T, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise OperatorError(f"doubly-stochastic operator must be square, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise OperatorError("doubly-stochastic operator needs finite non-negative entries")
        rows = np.abs(arr.sum(axis=1) - 1.0).max()
        cols = np.abs(arr.sum(axis=0) - 1.0).max()
        if rows > DISCRETE_TOL or cols > DISCRETE_TOL:
            raise OperatorError(f"row/column sums deviate from 1 by {max(rows, cols):.3e}")
        arr.setflags(write=False)
        object.__setattr__(self, 'T', arr)

    @property
    def size(self) -> int:
        return self.T.shape[0]

    @classmethod
    def identity(cls, n: int) -> 'DoublyStochasticOp':
        return cls(np.eye(n))

    @classmethod
    def uniform(cls, n: int) -> 'DoublyStochasticOp':
        return cls(np.full((n, n), 1.0 / n))

    @classmethod
    def from_permutations(cls, perms: Sequence[Sequence[int]], weights: Sequence[float]) -> 'DoublyStochasticOp':
        """Convex mixture of permutation matrices (Birkhoff form)."""
        w = np.asarray(weights, dtype=float)
        if len(perms) != w.size or w.size == 0 or np.any(w < 0) or w.sum() <= 0:
            raise OperatorError("need one non-negative weight per permutation")
        w = w / w.sum()
        n = len(perms[0])
        T = np.zeros((n, n))
        cols = np.arange(n)
        for perm, weight in zip(perms, w):
            perm = np.asarray(perm, dtype=int)
            if sorted(perm.tolist()) != list(range(n)):
                raise OperatorError(f"not a permutation of 0..{n - 1}: {perm.tolist()}")
            T[perm, cols] += weight
        return cls(T)

    def tensor(self, other: 'DoublyStochasticOp') -> 'DoublyStochasticOp':
        return DoublyStochasticOp(np.kron(self.T, other.T))


def _as_vector(p) -> ProbVector:
    return p if isinstance(p, ProbVector) else ProbVector(p)


def _as_matrix(p) -> ProbMatrix:
    return p if isinstance(p, ProbMatrix) else ProbMatrix(p)


def _entropy_of(arr: np.ndarray) -> float:
    nz = arr[arr > 0]
    return max(0.0, float(-np.sum(nz * np.log2(nz))))


def _divergence_of(p: np.ndarray, q: np.ndarray) -> float:
    support = p > 0
    if np.any(q[support] == 0):
        return math.inf
    ps, qs = p[support], q[support]
    return max(0.0, float(np.sum(ps * np.log2(ps / qs))))


# ── Discrete entropies ────────────────────────────────────────────────────────

def uniform(n: int) -> ProbVector:
    return ProbVector(np.full(n, 1.0 / n))


def product(pa, pb) -> ProbMatrix:
    return ProbMatrix.normalize(np.outer(_as_vector(pa).p, _as_vector(pb).p))


def marginal(p, axis: Axis) -> ProbVector:
    """Marginal of outcome ``axis``: 'A' sums over columns, 'B' over rows."""
    _check_axis(axis)
    m = _as_matrix(p)
    return ProbVector.normalize(m.p.sum(axis=1 if axis == 'A' else 0))


def shannon_entropy(p) -> float:
    return _entropy_of(_as_vector(p).p)


def joint_entropy(p) -> float:
    return _entropy_of(_as_matrix(p).p.ravel())


def relative_entropy(p, q) -> float:
    """D(p||q) in bits; ``math.inf`` when p has support where q vanishes."""
    p, q = _as_vector(p), _as_vector(q)
    if len(p) != len(q):
        raise DimensionMismatchError(f"relative entropy needs equal lengths, got {len(p)} and {len(q)}")
    return _divergence_of(p.p, q.p)


def conditional_entropy(p, condition_on: Axis = 'B') -> float:
    """H(X|Y) = H(X,Y) − H(Y) with Y the ``condition_on`` outcome."""
    _check_axis(condition_on)
    m = _as_matrix(p)
    return max(0.0, joint_entropy(m) - shannon_entropy(marginal(m, condition_on)))


def mutual_information(p) -> float:
    m     = _as_matrix(p)
    indep = np.outer(m.p.sum(axis=1), m.p.sum(axis=0))
    return _divergence_of(m.p.ravel(), indep.ravel())


# ── Majorization ──────────────────────────────────────────────────────────────

def _padded_sorted(p, q) -> tuple[np.ndarray, np.ndarray]:
    a, b = _as_vector(p).p, _as_vector(q).p
    n = max(a.size, b.size)
    a = np.sort(np.pad(a, (0, n - a.size)))[::-1]
    b = np.sort(np.pad(b, (0, n - b.size)))[::-1]
    return a, b


def majorization_slack(p, q) -> float:
    """Smallest partial-sum excess of p over q; negative means p does not majorize q."""
    a, b = _padded_sorted(p, q)
    return float(np.min(np.cumsum(a) - np.cumsum(b)))


def majorizes(p, q) -> bool:
    return bool(majorization_slack(p, q) >= -MAJORIZATION_SLACK)


def apply_doubly_stochastic(p, T: DoublyStochasticOp) -> ProbVector:
    p = _as_vector(p)
    if T.size != len(p):
        raise DimensionMismatchError(f"operator of size {T.size} applied to vector of length {len(p)}")
    return ProbVector.normalize(T.T @ p.p)


def apply_doubly_stochastic_joint(p, TA: DoublyStochasticOp, TB: DoublyStochasticOp) -> ProbMatrix:
    """(TA ⊗ TB) applied to a joint table, without materialising the Kronecker product."""
    m = _as_matrix(p)
    if m.shape != (TA.size, TB.size):
        raise DimensionMismatchError(f"operators {TA.size}x{TB.size} applied to table {m.shape}")
    return ProbMatrix.normalize(TA.T @ m.p @ TB.T.T)


# ── Gridded densities ─────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class Grid1D:
    start: float
    step: float
    values: np.ndarray

    def __post_init__(self):
        if not (math.isfinite(self.step) and self.step > 0):
            raise InvalidDistributionError(f"grid step must be positive, got {self.step!r}")
        if not math.isfinite(self.start):
            raise InvalidDistributionError("grid start must be finite")
        arr  = _readonly(self.values, 1, 'density')
        mass = self.step * float(arr.sum())
        if abs(mass - 1.0) > GRID_TOL:
            raise InvalidDistributionError(f"density integrates to {mass!r}, not 1")
        object.__setattr__(self, 'values', arr)

    @classmethod
    def normalize(cls, start: float, step: float, values) -> 'Grid1D':
        arr  = _readonly(values, 1, 'density')
        mass = step * float(arr.sum())
        if mass <= 0:
            raise InvalidDistributionError("cannot normalize a density with zero mass")
        return cls(float(start), float(step), arr / mass)

    @classmethod
    def from_function(cls, fn: Callable[[np.ndarray], np.ndarray], lo: float, hi: float, step: float) -> 'Grid1D':
        """Sample ``fn`` at cell centers of [lo, hi) and normalize."""
        n = int(round((hi - lo) / step))
        centers = lo + (np.arange(n) + 0.5) * step
        return cls.normalize(lo, step, fn(centers))

    @property
    def size(self) -> int:
        return self.values.size

    @property
    def stop(self) -> float:
        return self.start + self.size * self.step

    def centers(self) -> np.ndarray:
        return self.start + (np.arange(self.size) + 0.5) * self.step

    def edges(self) -> np.ndarray:
        return self.start + np.arange(self.size + 1) * self.step

    def cell_masses(self) -> np.ndarray:
        return self.values * self.step

    def block_average(self, k: int) -> 'Grid1D':
        """Replace every k consecutive cells by their mean (zero-padding the tail)."""
        if k < 1:
            raise ValueError("block size must be >= 1")
        padded = np.pad(self.values, (0, (-self.size) % k))
        return Grid1D.normalize(self.start, self.step * k, padded.reshape(-1, k).mean(axis=1))


@dataclass(frozen=True, eq=False)
class Grid2D:
    """Joint density; ``values[i, j]`` is the density on A-cell i and B-cell j."""
    start_a: float
    step_a: float
    start_b: float
    step_b: float
    values: np.ndarray

    def __post_init__(self):
        for step in (self.step_a, self.step_b):
            if not (math.isfinite(step) and step > 0):
                raise InvalidDistributionError(f"grid steps must be positive, got {step!r}")
        arr  = _readonly(self.values, 2, 'joint density')
        mass = self.step_a * self.step_b * float(arr.sum())
        if abs(mass - 1.0) > GRID_TOL:
            raise InvalidDistributionError(f"joint density integrates to {mass!r}, not 1")
        object.__setattr__(self, 'values', arr)

    @classmethod
    def normalize(cls, start_a: float, step_a: float, start_b: float, step_b: float, values) -> 'Grid2D':
        arr  = _readonly(values, 2, 'joint density')
        mass = step_a * step_b * float(arr.sum())
        if mass <= 0:
            raise InvalidDistributionError("cannot normalize a joint density with zero mass")
        return cls(float(start_a), float(step_a), float(start_b), float(step_b), arr / mass)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def centers_a(self) -> np.ndarray:
        return self.start_a + (np.arange(self.shape[0]) + 0.5) * self.step_a

    def centers_b(self) -> np.ndarray:
        return self.start_b + (np.arange(self.shape[1]) + 0.5) * self.step_b

    def edges_a(self) -> np.ndarray:
        return self.start_a + np.arange(self.shape[0] + 1) * self.step_a

    def edges_b(self) -> np.ndarray:
        return self.start_b + np.arange(self.shape[1] + 1) * self.step_b

    def cell_masses(self) -> np.ndarray:
        return self.values * (self.step_a * self.step_b)

    def marginal(self, axis: Axis) -> Grid1D:
        _check_axis(axis)
        if axis == 'A':
            return Grid1D.normalize(self.start_a, self.step_a, self.values.sum(axis=1) * self.step_b)
        return Grid1D.normalize(self.start_b, self.step_b, self.values.sum(axis=0) * self.step_a)

    def product_of_marginals(self) -> 'Grid2D':
        """Separable density with the same marginals."""
        ma, mb = self.marginal('A'), self.marginal('B')
        return Grid2D.normalize(self.start_a, self.step_a, self.start_b, self.step_b, np.outer(ma.values, mb.values))

    def block_average(self, ka: int, kb: int) -> 'Grid2D':
        if ka < 1 or kb < 1:
            raise ValueError("block sizes must be >= 1")
        na, nb = self.shape
        padded = np.pad(self.values, ((0, (-na) % ka), (0, (-nb) % kb)))
        blocks = padded.reshape(padded.shape[0] // ka, ka, padded.shape[1] // kb, kb).mean(axis=(1, 3))
        return Grid2D.normalize(self.start_a, self.step_a * ka, self.start_b, self.step_b * kb, blocks)


class DominanceCurve(NamedTuple):
    """Integral of the largest density values over total measure ``measure``."""
    measure: np.ndarray
    mass: np.ndarray


def continuous_entropy(g: Grid1D | Grid2D) -> float:
    if isinstance(g, Grid2D):
        cell = g.step_a * g.step_b
    elif isinstance(g, Grid1D):
        cell = g.step
    else:
        raise InvalidDistributionError(f"expected Grid1D or Grid2D, got {type(g).__name__}")
    v = g.values.ravel()
    v = v[v > 0]
    return float(-np.sum(v * np.log2(v)) * cell)


def continuous_conditional_entropy(g: Grid2D, condition_on: Axis = 'B') -> float:
    return continuous_entropy(g) - continuous_entropy(g.marginal(condition_on))


def dominance_curve(g: Grid1D | Grid2D) -> DominanceCurve:
    cell = g.step_a * g.step_b if isinstance(g, Grid2D) else g.step
    ordered = np.sort(g.values.ravel())[::-1]
    measure = np.arange(ordered.size + 1) * cell
    mass    = np.concatenate(([0.0], np.cumsum(ordered) * cell))
    return DominanceCurve(measure, mass)


def continuous_majorizes(high: Grid1D | Grid2D, low: Grid1D | Grid2D) -> tuple[bool, float]:
    """Whether ``high`` ≻ ``low`` as densities, plus the minimal curve slack.

    Both dominance curves are piecewise linear and concave, so comparing them at
    the union of their nodes is exhaustive.
    """
    ch, cl = dominance_curve(high), dominance_curve(low)
    nodes  = np.union1d(ch.measure, cl.measure)
    fh = np.interp(nodes, ch.measure, ch.mass, right=ch.mass[-1])
    fl = np.interp(nodes, cl.measure, cl.mass, right=cl.mass[-1])
    slack = float(np.min(fh - fl))
    return bool(slack >= -GRID_TOL), float(slack)
