"""Vector, matrix, and norm primitives for Markov chain perturbation analysis.

Distributions over states {0..n-1} are handled as row vectors, reward
functions as column vectors, and the two conventions meet in three norm
families selected by :class:`Norm`:

==========  ==================  ===================  ============================
kind        measure (row)       function (column)    matrix (induced)
==========  ==================  ===================  ============================
``one``     max_i |m_i|         sum_i |f_i|          max column abs sum
``inf``     sum_i |m_i|         max_i |f_i|          max row abs sum
``v``       sum_i a^i |m_i|     sup_i |f_i| / a^i    sup_i sum_j a^(j-i) |A_ij|
==========  ==================  ===================  ============================

The measure and function columns are deliberately flipped against each other:
transposing a column vector swaps its 1- and sup-norms, and measures are
transposed rows.  The ``v`` family uses geometric weights a^i with a >= 1, so
``v`` at a = 1 coincides with ``inf``.

All types are immutable after construction and every operation here is a pure
function, so everything in this module can be shared freely across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "McError",
    "InvalidInput",
    "NotUnichain",
    "DeviationUnavailable",
    "InvalidTabooSpec",
    "NoUniformColumn",
    "TabooNotProper",
    "NoFeasibleAlpha",
    "OutOfDomain",
    "DegeneratePerturbation",
    "NoCertificate",
    "Norm",
    "StochasticMatrix",
    "ProbabilityMeasure",
    "point_mass",
    "measure_norm",
    "function_norm",
    "operator_norm",
    "reward_gap_bound",
    "optimize_alpha",
]

ROW_SUM_TOL = 1e-12


class McError(ValueError):
    """Base class for all domain errors raised by this package."""


class InvalidInput(McError):
    """Arguments violate a documented precondition (shape, range, finiteness)."""


class NotUnichain(McError):
    """The chain does not have a unique stationary distribution."""


class DeviationUnavailable(McError):
    """The fundamental matrix is numerically singular."""


class InvalidTabooSpec(McError):
    """The requested rank-one downdate does not yield a valid taboo kernel."""


class NoUniformColumn(McError):
    """Every column of the kernel contains a zero entry."""


class TabooNotProper(McError):
    """The taboo kernel has norm >= 1, so its Neumann series diverges."""


class NoFeasibleAlpha(McError):
    """The bound is infinite on the whole weight-base grid."""


class OutOfDomain(McError):
    """A parameter lies outside the analytic domain of a closed-form expression."""


class DegeneratePerturbation(McError):
    """The perturbation does not move the stationary distribution."""


class NoCertificate(McError):
    """No stability certificate can be issued from the given norms."""


@dataclass(frozen=True)
class Norm:
    """Selector for the 1-norm, sup-norm, or geometric v-norm family.

    ``alpha`` is the weight base of the v-norm and is ignored for the other
    two kinds; it must satisfy alpha >= 1 so that the weights a^i are >= 1
    with weight 1 at state 0.
    """

    kind: str
    alpha: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("one", "inf", "v"):
            raise InvalidInput(f"unknown norm kind {self.kind!r}")
        if not (np.isfinite(self.alpha) and self.alpha >= 1.0):
            raise InvalidInput("v-norm weight base must be finite and >= 1")

    @classmethod
    def one(cls) -> "Norm":
        return cls("one")

    @classmethod
    def infinity(cls) -> "Norm":
        return cls("inf")

    @classmethod
    def v(cls, alpha: float) -> "Norm":
        return cls("v", float(alpha))

    def __str__(self) -> str:
        return self.kind if self.kind != "v" else f"v(alpha={self.alpha:g})"


def _as_vector(x, name: str = "vector") -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim != 1:
        raise InvalidInput(f"{name} must be one-dimensional, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInput(f"{name} has non-finite entries")
    return a


def _as_square_matrix(x, name: str = "matrix") -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInput(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInput(f"{name} has non-finite entries")
    return a


class StochasticMatrix:
    """Dense row-stochastic transition matrix on states {0..n-1}.

    Entries must be exactly nonnegative and each row must sum to 1 within
    ``ROW_SUM_TOL``.  With ``renormalize=True`` rows are rescaled to sum to 1
    before validation; truncation paths that discard tail mass use this.
    The stored array is marked read-only.
    """

    __slots__ = ("a",)

    def __init__(self, entries, renormalize: bool = False) -> None:
        a = np.array(entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise InvalidInput(f"kernel must be square, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise InvalidInput("kernel has non-finite entries")
        if np.any(a < 0.0):
            raise InvalidInput("kernel has negative entries")
        sums = a.sum(axis=1)
        if renormalize:
            if np.any(sums <= 0.0):
                raise InvalidInput("cannot renormalize a row with zero mass")
            a = a / sums[:, None]
        elif np.any(np.abs(sums - 1.0) > ROW_SUM_TOL):
            worst = float(np.abs(sums - 1.0).max())
            raise InvalidInput(f"row sums deviate from 1 by {worst:.3e} > {ROW_SUM_TOL:.0e}")
        a.setflags(write=False)
        self.a = a

    @property
    def n(self) -> int:
        return self.a.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.a, dtype=dtype)

    def __repr__(self) -> str:
        return f"StochasticMatrix(n={self.n})"


class ProbabilityMeasure:
    """Probability distribution on {0..n-1}, stored as a dense row vector.

    Weights must be nonnegative and sum to 1 within ``ROW_SUM_TOL`` unless
    ``renormalize=True``.
    """

    __slots__ = ("w",)

    def __init__(self, weights, renormalize: bool = False) -> None:
        w = np.array(_as_vector(weights, "weights"), dtype=float)
        if np.any(w < 0.0):
            raise InvalidInput("probability weights must be nonnegative")
        total = w.sum()
        if renormalize:
            if total <= 0.0:
                raise InvalidInput("cannot renormalize a zero measure")
            w = w / total
        elif abs(total - 1.0) > ROW_SUM_TOL:
            raise InvalidInput(f"weights sum to {total!r}, expected 1 within {ROW_SUM_TOL:.0e}")
        w.setflags(write=False)
        self.w = w

    @property
    def n(self) -> int:
        return self.w.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.w, dtype=dtype)

    def __repr__(self) -> str:
        return f"ProbabilityMeasure(n={self.n})"


def point_mass(n: int, i: int) -> ProbabilityMeasure:
    """Degenerate distribution putting all mass on state ``i``."""
    if not 0 <= i < n:
        raise InvalidInput(f"state {i} out of range for {n} states")
    w = np.zeros(n)
    w[i] = 1.0
    return ProbabilityMeasure(w)


def _geometric_weights(alpha: float, n: int) -> np.ndarray:
    # may overflow to inf for very long vectors; callers guard 0 * inf
    return alpha ** np.arange(n, dtype=float)


def measure_norm(m, norm: Norm) -> float:
    """Norm of a (possibly signed) measure given as a row vector.

    ``one`` is the largest absolute weight, ``inf`` the total absolute mass
    (total variation up to a factor 2), and ``v`` the geometrically weighted
    absolute mass.
    """
    mv = _as_vector(m, "measure")
    am = np.abs(mv)
    if norm.kind == "one":
        return float(am.max())
    if norm.kind == "inf":
        return float(am.sum())
    w = _geometric_weights(norm.alpha, am.size)
    terms = np.where(am == 0.0, 0.0, w * am)
    return float(terms.sum())


def function_norm(f, norm: Norm) -> float:
    """Norm of a reward vector (column-vector convention, see module docs)."""
    fv = _as_vector(f, "reward vector")
    af = np.abs(fv)
    if norm.kind == "one":
        return float(af.sum())
    if norm.kind == "inf":
        return float(af.max())
    w = _geometric_weights(norm.alpha, af.size)
    return float((af / w).max())


def operator_norm(A, norm: Norm) -> float:
    """Induced matrix norm compatible with the measure/function pairing."""
    if isinstance(A, StochasticMatrix):
        A = A.a
    aa = np.abs(_as_square_matrix(A))
    if norm.kind == "one":
        return float(aa.sum(axis=0).max())
    if norm.kind == "inf":
        return float(aa.sum(axis=1).max())
    n = aa.shape[0]
    idx = np.arange(n, dtype=float)
    ratio = norm.alpha ** (idx[None, :] - idx[:, None])
    terms = np.where(aa == 0.0, 0.0, ratio * aa)
    return float(terms.sum(axis=1).max())


def reward_gap_bound(m1, m2, f, norm: Norm) -> float:
    """Upper bound on |m1^T f - m2^T f| via the matched measure/function norms."""
    a1 = _as_vector(m1, "first measure")
    a2 = _as_vector(m2, "second measure")
    fv = _as_vector(f, "reward vector")
    if not (a1.size == a2.size == fv.size):
        raise InvalidInput("measure/reward dimensions do not match")
    return measure_norm(a1 - a2, norm) * function_norm(fv, norm)


def optimize_alpha(
    bound_fn: Callable[[float], float],
    alpha_lo: float,
    alpha_hi: float,
    grid: int,
) -> tuple[float, float]:
    """Minimize a bound over the v-norm weight base by deterministic grid scan.

    Grid search rather than a derivative method: bound functions are typically
    piecewise (max terms) and return +inf where inapplicable.  Ties break to
    the smallest weight base, scanning low to high.

    Returns the minimizing grid point and the bound value there.  Raises
    :class:`NoFeasibleAlpha` if the bound is infinite on the whole grid.
    """
    if not (np.isfinite(alpha_lo) and np.isfinite(alpha_hi)):
        raise InvalidInput("grid endpoints must be finite")
    if not (1.0 <= alpha_lo < alpha_hi):
        raise InvalidInput("need 1 <= alpha_lo < alpha_hi")
    if grid < 2:
        raise InvalidInput("need at least two grid points")
    best_alpha = None
    best_value = math.inf
    for a in np.linspace(alpha_lo, alpha_hi, int(grid)):
        value = float(bound_fn(float(a)))
        if math.isnan(value):
            value = math.inf
        if value < best_value:
            best_alpha = float(a)
            best_value = value
    if best_alpha is None:
        raise NoFeasibleAlpha("bound is infinite on the entire weight-base grid")
    return best_alpha, best_value
