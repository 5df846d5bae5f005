"""Stationary distributions, deviation matrices, and taboo kernels.

The deviation matrix is computed through two independent routes that are
cross-checked in the test suite: the fundamental-matrix route
(I - P + Pi)^{-1} - Pi, and the taboo route (I - Pi)(I - T)^{-1}(I - Pi)
which only needs a substochastic kernel T with norm < 1.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from math import gcd

import numpy as np
import scipy.linalg
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .core import (
    DeviationUnavailable,
    InvalidInput,
    InvalidTabooSpec,
    NoUniformColumn,
    Norm,
    NotUnichain,
    ProbabilityMeasure,
    StochasticMatrix,
    TabooNotProper,
    measure_norm,
    operator_norm,
    point_mass,
)

__all__ = [
    "stationary_distribution",
    "ErgodicDecomposition",
    "ergodic_decomposition",
    "TabooSpec",
    "taboo_kernel",
    "remove_column",
    "auto_taboo",
    "recurrence_certificate",
    "deviation_via_taboo",
    "stationary_norm_bound",
    "UnichainReport",
    "validate_unichain",
]

_RESIDUAL_TOL = 1e-8
_TABOO_CLAMP = 1e-14


def stationary_distribution(P: StochasticMatrix) -> ProbabilityMeasure:
    """Solve pi^T P = pi^T with sum(pi) = 1 by dense LU.

    The last equation of (I - P)^T x = 0 is replaced by the normalization
    1^T x = 1.  For a unichain kernel the replaced system is nonsingular
    (the dropped equation is a linear combination of the others), so failure
    of the solve, negative mass, or a large residual all indicate that the
    chain is not unichain.

    Parameters
    ----------
    P : StochasticMatrix
        Transition kernel with a unique stationary distribution.

    Returns
    -------
    ProbabilityMeasure
        The row vector pi with pi^T P = pi^T, residual below 1e-8.

    Raises
    ------
    NotUnichain
        If the replaced system is singular, produces negative mass, or the
        residual check fails.
    """
    n = P.n
    A = (np.eye(n) - P.a).T.copy()
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        x = scipy.linalg.solve(A, b)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise NotUnichain("singular stationary system; no unique stationary distribution") from exc
    if not np.all(np.isfinite(x)):
        raise NotUnichain("stationary solve produced non-finite values")
    if x.min() < -1e-9:
        raise NotUnichain("stationary solve produced negative mass; chain is not unichain")
    x = np.clip(x, 0.0, None)
    x /= x.sum()
    residual = float(np.abs(x @ P.a - x).max())
    if residual > _RESIDUAL_TOL:
        raise NotUnichain(f"stationary residual {residual:.3e} exceeds {_RESIDUAL_TOL:.0e}")
    return ProbabilityMeasure(x, renormalize=True)


@dataclass(frozen=True)
class ErgodicDecomposition:
    """Stationary distribution pi, ergodic projector, deviation and fundamental matrices.

    The projector has every row equal to pi^T, the fundamental matrix is
    (I - P + projector)^{-1}, and the deviation matrix is their difference.
    """

    pi: ProbabilityMeasure
    projector: np.ndarray
    deviation: np.ndarray
    fundamental: np.ndarray


def ergodic_decomposition(P: StochasticMatrix) -> ErgodicDecomposition:
    """Fundamental-matrix route to the deviation matrix (dense LU).

    Requires an aperiodic unichain kernel (caller-asserted; see
    :func:`validate_unichain`).
    """
    pi = stationary_distribution(P)
    n = P.n
    projector = np.tile(pi.w, (n, 1))
    try:
        fundamental = scipy.linalg.inv(np.eye(n) - P.a + projector)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise DeviationUnavailable("fundamental matrix is numerically singular") from exc
    if not np.all(np.isfinite(fundamental)):
        raise DeviationUnavailable("fundamental matrix has non-finite entries")
    deviation = fundamental - projector
    for arr in (projector, deviation, fundamental):
        arr.setflags(write=False)
    return ErgodicDecomposition(pi, projector, deviation, fundamental)


@dataclass(frozen=True)
class TabooSpec:
    """Rank-one downdate T = P - h sigma^T defining a taboo kernel.

    ``h`` is a nonnegative column vector that must receive positive stationary
    mass (pi^T h > 0; in particular h cannot vanish identically), and
    ``sigma`` is a probability measure.
    """

    h: np.ndarray
    sigma: np.ndarray

    def __post_init__(self) -> None:
        h = np.array(self.h, dtype=float)
        if h.ndim != 1 or not np.all(np.isfinite(h)):
            raise InvalidTabooSpec("h must be a finite vector")
        if np.any(h < 0.0):
            raise InvalidTabooSpec("h must be nonnegative")
        if h.max() <= 0.0:
            raise InvalidTabooSpec("h vanishes identically, so pi^T h = 0 for every pi")
        sigma = np.array(ProbabilityMeasure(self.sigma).w)
        if sigma.size != h.size:
            raise InvalidTabooSpec("h and sigma dimensions do not match")
        h.setflags(write=False)
        sigma.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "sigma", sigma)


def taboo_kernel(P: StochasticMatrix, spec: TabooSpec) -> np.ndarray:
    """Form T = P - h sigma^T, clamping floating-point slack to zero.

    Entries below -1e-14 mean the downdate leaves the substochastic cone and
    raise :class:`InvalidTabooSpec`.
    """
    if spec.h.size != P.n:
        raise InvalidTabooSpec("spec dimension does not match kernel")
    T = P.a - np.outer(spec.h, spec.sigma)
    worst = float(T.min())
    if worst < -_TABOO_CLAMP:
        raise InvalidTabooSpec(f"downdate produces negative entry {worst:.3e}")
    return np.clip(T, 0.0, None)


def remove_column(P: StochasticMatrix, i: int) -> np.ndarray:
    """Kernel with column ``i`` zeroed: transitions into state ``i`` are forbidden."""
    if not 0 <= i < P.n:
        raise InvalidInput(f"state {i} out of range for {P.n} states")
    T = P.a.copy()
    T[:, i] = 0.0
    return T


def auto_taboo(P: StochasticMatrix) -> tuple[TabooSpec, np.ndarray]:
    """Pick the taboo column with the best uniform guarantee.

    Selects the column whose smallest entry is largest (ties to the lowest
    index), removes it, and returns the downdate description together with T.
    Every row of T then sums to at most 1 - min_i P[i, j*], so the v-norm of
    T at weight base 1 is strictly below 1.
    """
    mins = P.a.min(axis=0)
    j = int(np.argmax(mins))
    if mins[j] <= 0.0:
        raise NoUniformColumn("every column contains a zero entry")
    spec = TabooSpec(h=P.a[:, j].copy(), sigma=point_mass(P.n, j).w)
    return spec, remove_column(P, j)


def recurrence_certificate(P: StochasticMatrix, i: int, norm: Norm) -> tuple[bool, float]:
    """Positive-recurrence certificate: norm of the kernel avoiding state ``i``.

    A value strictly below 1 certifies positive recurrence of an irreducible
    chain (the expected number of visits before hitting ``i`` is finite).
    """
    value = operator_norm(remove_column(P, i), norm)
    return value < 1.0, value


def deviation_via_taboo(P: StochasticMatrix, T, norm: Norm) -> np.ndarray:
    """Taboo route to the deviation matrix: (I - Pi)(I - T)^{-1}(I - Pi).

    Requires ``operator_norm(T, norm) < 1``; the inverse is taken by LU
    rather than Neumann summation since the matrix is finite.
    """
    Tm = np.asarray(T, dtype=float)
    t = operator_norm(Tm, norm)
    if t >= 1.0:
        raise TabooNotProper(f"taboo kernel norm {t:.6f} >= 1")
    pi = stationary_distribution(P)
    centering = np.eye(P.n) - np.tile(pi.w, (P.n, 1))
    X = scipy.linalg.solve(np.eye(P.n) - Tm, centering)
    return centering @ X


def stationary_norm_bound(pi_h: float, sigma, T, alpha: float) -> float:
    """Upper bound on the v-norm of pi^T from a proper taboo kernel.

    ``pi_h`` is pi^T h for the downdate defining T.  The bound is
    pi_h * ||sigma^T||_v / (1 - ||T||_v).
    """
    if pi_h <= 0.0:
        raise InvalidInput("pi^T h must be positive")
    norm = Norm.v(alpha)
    t = operator_norm(np.asarray(T, dtype=float), norm)
    if t >= 1.0:
        raise TabooNotProper(f"taboo kernel norm {t:.6f} >= 1")
    return pi_h * measure_norm(sigma, norm) / (1.0 - t)


@dataclass(frozen=True)
class UnichainReport:
    """Structural diagnosis of the support digraph."""

    unichain: bool
    aperiodic: bool
    n_closed_classes: int
    period: int | None

    @property
    def ergodic(self) -> bool:
        return self.unichain and self.aperiodic


def _class_period(support: np.ndarray, nodes: np.ndarray) -> int:
    """Period of a strongly connected class: gcd of level defects over its edges."""
    inside = np.zeros(support.shape[0], dtype=bool)
    inside[nodes] = True
    level = {int(nodes[0]): 0}
    queue = deque([int(nodes[0])])
    while queue:
        u = queue.popleft()
        for v in np.flatnonzero(support[u] & inside):
            v = int(v)
            if v not in level:
                level[v] = level[u] + 1
                queue.append(v)
    g = 0
    for u in nodes:
        u = int(u)
        for v in np.flatnonzero(support[u] & inside):
            g = gcd(g, abs(level[u] + 1 - level[int(v)]))
    return g if g > 0 else 1


def validate_unichain(P: StochasticMatrix) -> UnichainReport:
    """Check for exactly one closed communicating class and its aperiodicity.

    Strongly connected components of the support digraph are computed, a
    component is closed when no edge leaves it, and the period of a closed
    class is the gcd of its cycle lengths (transient states are ignored).
    Never raises; returns a diagnosis.
    """
    support = P.a > 0.0
    n_comp, labels = connected_components(
        csr_matrix(support.astype(np.uint8)), directed=True, connection="strong"
    )
    closed: list[np.ndarray] = []
    for c in range(n_comp):
        nodes = np.flatnonzero(labels == c)
        outside = labels != c
        if not support[np.ix_(nodes, np.flatnonzero(outside))].any():
            closed.append(nodes)
    unichain = len(closed) == 1
    if unichain:
        period = _class_period(support, closed[0])
        return UnichainReport(True, period == 1, 1, period)
    periods = [_class_period(support, nodes) for nodes in closed]
    return UnichainReport(False, all(p == 1 for p in periods), len(closed), None)
