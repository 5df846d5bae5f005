"""Perturbation bounds on the stationary distribution of a mixed kernel.

For kernels P and R and the convex mix P(theta) = (1 - theta) P + theta R,
four bound families estimate ||pi_{P(theta)}^T - pi_P^T||:

* condition-number bounds (CNB): linear in theta, built from the deviation
  matrix (kappa3, kappa6) or from a taboo-kernel resolvent (update route);
* the strong-stability bound (SSB): nonlinear, needs only a proper taboo
  kernel, so it also covers truncation-free infinite models;
* the direct bound (DB): exploits the exact update identity
  pi_R^T - pi_P^T = pi_R^T (R - P) D_P and detects equal stationary
  distributions;
* series-expansion bounds SEB(K): partial sums of the update iteration with
  an explicit remainder, whose relative error vanishes at rate theta^K.

Inapplicable bounds are reported as +inf with ``applicable=False`` rather
than raised, so sweeps over theta always produce complete rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .core import (
    DegeneratePerturbation,
    InvalidInput,
    NoCertificate,
    Norm,
    ProbabilityMeasure,
    StochasticMatrix,
    TabooNotProper,
    measure_norm,
    operator_norm,
)
from .stationary import stationary_distribution

__all__ = [
    "PerturbationPair",
    "ScaledPerturbation",
    "BoundReport",
    "CBound",
    "kappa3",
    "kappa6",
    "cnb_update",
    "cnb_bound",
    "direct_bound",
    "ssb",
    "ssb_theta_domain",
    "seb",
    "seb_polynomial",
    "seb_polynomial_eval",
    "series_expansion",
    "bias_term_estimate",
    "ConditionReport",
    "neumann_condition",
    "relative_errors",
    "stability_domain",
]


@dataclass(frozen=True)
class PerturbationPair:
    """Base kernel, perturbing kernel, and the norm the bounds are stated in."""

    P: StochasticMatrix
    R: StochasticMatrix
    norm: Norm

    def __post_init__(self) -> None:
        if self.P.n != self.R.n:
            raise InvalidInput("kernels must have the same state count")

    def difference(self) -> np.ndarray:
        return self.R.a - self.P.a


@dataclass(frozen=True)
class ScaledPerturbation:
    """Mix P(theta) = (1 - theta) P + theta R for theta in [0, 1]."""

    pair: PerturbationPair
    theta: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.theta) and 0.0 <= self.theta <= 1.0):
            raise InvalidInput("theta must lie in [0, 1]")

    def kernel(self) -> StochasticMatrix:
        mix = (1.0 - self.theta) * self.pair.P.a + self.theta * self.pair.R.a
        return StochasticMatrix(mix)

    def delta(self) -> np.ndarray:
        """Scaled difference theta (R - P)."""
        return self.theta * self.pair.difference()


@dataclass(frozen=True)
class BoundReport:
    """Value of one bound family, its applicability, and condition slack.

    ``target`` records which measure norm the bound dominates (kappa3 bounds
    the largest entry of the difference, kappa6 and the update route bound
    its total absolute mass, the remaining families inherit the pair norm).
    ``condition_slack`` is the distance of the applicability condition from
    violation; +inf for unconditional bounds.
    """

    family: str
    value: float
    applicable: bool
    condition_slack: float
    target: Norm

    def __post_init__(self) -> None:
        if not self.applicable and not math.isinf(self.value):
            raise InvalidInput("inapplicable bound must carry value +inf")

    @classmethod
    def inapplicable(cls, family: str, condition_slack: float, target: Norm) -> "BoundReport":
        return cls(family, math.inf, False, condition_slack, target)


@dataclass(frozen=True)
class CBound:
    """Upper bound on the norm of any stationary distribution on the space.

    Equals 1 for the ``one`` and ``inf`` measure norms (and for v at weight
    base 1).  For a genuine v-norm the supremum over all kernels is not
    computable in general, so a value must be supplied, e.g. from
    :func:`mcperturb.stationary.stationary_norm_bound` or model knowledge.
    """

    value: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.value) and self.value >= 1.0):
            raise InvalidInput("c-bound must be finite and >= 1")

    @classmethod
    def for_norm(cls, norm: Norm, value: float | None = None) -> "CBound":
        if value is not None:
            return cls(float(value))
        if norm.kind in ("one", "inf") or norm.alpha == 1.0:
            return cls(1.0)
        raise InvalidInput("c-bound for a v-norm with weight base > 1 must be supplied")


def kappa3(D) -> float:
    """Condition number from column spreads of the deviation matrix.

    Bound usage: largest-entry norm of pi_R^T - pi_P^T is at most
    kappa3 * max-row-sum norm of R - P.
    """
    Dm = np.asarray(D, dtype=float)
    spread = Dm.diagonal() - Dm.min(axis=0)
    return float(spread.max()) / 2.0


def kappa6(D) -> float:
    """Condition number from the largest pairwise row distance of the deviation matrix.

    Bound usage: total-absolute-mass norm of pi_R^T - pi_P^T is at most
    kappa6 * max-row-sum norm of R - P.  Scans pairs with the first maximizing
    index winning, which only matters for diagnostics.
    """
    Dm = np.asarray(D, dtype=float)
    best = 0.0
    for i in range(Dm.shape[0]):
        best = max(best, float(np.abs(Dm - Dm[i]).sum(axis=1).max()))
    return best / 2.0


def cnb_update(P: StochasticMatrix, T) -> float:
    """Condition number from the taboo resolvent: ||(I - T)^{-1}(I - Pi)||_inf.

    Needs ``||T||_inf < 1``; the resulting kappa multiplies ||R - P||_inf to
    bound the total-absolute-mass norm of the stationary difference.
    """
    Tm = np.asarray(T, dtype=float)
    t = operator_norm(Tm, Norm.infinity())
    if t >= 1.0:
        raise TabooNotProper(f"taboo kernel norm {t:.6f} >= 1")
    pi = stationary_distribution(P)
    centering = np.eye(P.n) - np.tile(pi.w, (P.n, 1))
    X = scipy.linalg.solve(np.eye(P.n) - Tm, centering)
    return operator_norm(X, Norm.infinity())


_CNB_TARGETS = {
    "cnb_k3": Norm.one(),
    "cnb_k6": Norm.infinity(),
    "cnb_update": Norm.infinity(),
}


def cnb_bound(kappa: float, pert: ScaledPerturbation, family: str = "cnb_k6") -> BoundReport:
    """Condition-number bound theta * kappa * ||R - P||; always applicable.

    The kappa3/kappa6/update variants measure R - P in the max-row-sum norm;
    the generic ``"cnb"`` family uses the pair norm on both sides.
    """
    if not (np.isfinite(kappa) and kappa >= 0.0):
        raise InvalidInput("kappa must be finite and nonnegative")
    if family in _CNB_TARGETS:
        matrix_norm = Norm.infinity()
        target = _CNB_TARGETS[family]
    elif family == "cnb":
        matrix_norm = target = pert.pair.norm
    else:
        raise InvalidInput(f"unknown condition-number family {family!r}")
    value = pert.theta * kappa * operator_norm(pert.pair.difference(), matrix_norm)
    return BoundReport(family, value, True, math.inf, target)


def direct_bound(
    pert: ScaledPerturbation, D, pi: ProbabilityMeasure | None = None
) -> BoundReport:
    """Direct bound ||pi_P^T M|| / (1 - ||M||) with M = theta (R - P) D.

    Applicable when ||M|| < 1.  Because the numerator contracts with pi_P,
    perturbations that keep the stationary distribution fixed are detected
    and yield 0.
    """
    norm = pert.pair.norm
    M = pert.delta() @ np.asarray(D, dtype=float)
    m = operator_norm(M, norm)
    slack = 1.0 - m
    if slack <= 0.0:
        return BoundReport.inapplicable("db", slack, norm)
    if pi is None:
        pi = stationary_distribution(pert.pair.P)
    value = measure_norm(np.asarray(pi, dtype=float) @ M, norm) / slack
    return BoundReport("db", value, True, slack, norm)


def ssb(pert: ScaledPerturbation, T, pi_norm: float) -> BoundReport:
    """Strong-stability bound from a taboo kernel and a bound on ||pi_P^T||.

    With t = ||T||, d = theta ||R - P||, s = 1 + pi_norm, the bound is
    pi_norm * d * s / (1 - t - d * s), applicable when t + d * s < 1.
    ``pi_norm`` must dominate ||pi_P^T|| in the pair norm (exact value or a
    taboo-kernel bound).  See :func:`ssb_theta_domain` for the admissible
    range of theta.
    """
    if pi_norm <= 0.0:
        raise InvalidInput("pi_norm must be positive")
    norm = pert.pair.norm
    t = operator_norm(np.asarray(T, dtype=float), norm)
    d = pert.theta * operator_norm(pert.pair.difference(), norm)
    s = 1.0 + pi_norm
    slack = 1.0 - t - d * s
    if slack <= 0.0:
        return BoundReport.inapplicable("ssb", slack, norm)
    return BoundReport("ssb", pi_norm * d * s / slack, True, slack, norm)


def ssb_theta_domain(pair: PerturbationPair, T, pi_norm: float) -> float:
    """Largest theta below which the strong-stability bound stays applicable."""
    t = operator_norm(np.asarray(T, dtype=float), pair.norm)
    d = operator_norm(pair.difference(), pair.norm)
    if t >= 1.0:
        return 0.0
    if d == 0.0:
        return math.inf
    return (1.0 - t) / (d * (1.0 + pi_norm))


def seb(
    pert: ScaledPerturbation,
    D,
    order: int,
    c: CBound,
    pi: ProbabilityMeasure | None = None,
) -> BoundReport:
    """Series-expansion bound of the given order.

    Sums the first ``order`` correction terms pi_P^T M^k exactly and bounds
    the remainder by c * ||M^(order+1)|| with M = theta (R - P) D.  Valid for
    every theta in [0, 1]; the theta^order relative-error rate additionally
    needs ||M|| < 1, and the reported slack is 1 - ||M||.
    """
    if order < 0:
        raise InvalidInput("order must be >= 0")
    norm = pert.pair.norm
    M = pert.delta() @ np.asarray(D, dtype=float)
    if pi is None:
        pi = stationary_distribution(pert.pair.P)
    x = np.array(np.asarray(pi, dtype=float))
    acc = np.zeros_like(x)
    for _ in range(order):
        x = x @ M
        acc += x
    head = measure_norm(acc, norm)
    tail = c.value * operator_norm(np.linalg.matrix_power(M, order + 1), norm)
    slack = 1.0 - operator_norm(M, norm)
    return BoundReport(f"seb_{order}", head + tail, True, slack, norm)


def seb_polynomial(
    pair: PerturbationPair,
    D,
    order: int,
    c: CBound,
    pi: ProbabilityMeasure | None = None,
) -> np.ndarray:
    """Theta-free coefficients a_1..a_{order+1} of the polynomial series bound.

    a_k = ||pi_P^T ((R - P) D)^k|| for k <= order and the last coefficient is
    c * ||((R - P) D)^(order+1)||, so sum_k a_k theta^k bounds the stationary
    difference for every theta.  Pulling norms inside the powers makes this
    weaker than :func:`seb` at any fixed theta, but the coefficients are
    computed once per sweep.
    """
    if order < 0:
        raise InvalidInput("order must be >= 0")
    norm = pair.norm
    M0 = pair.difference() @ np.asarray(D, dtype=float)
    if pi is None:
        pi = stationary_distribution(pair.P)
    coeffs = np.empty(order + 1)
    x = np.array(np.asarray(pi, dtype=float))
    for k in range(order):
        x = x @ M0
        coeffs[k] = measure_norm(x, norm)
    coeffs[order] = c.value * operator_norm(np.linalg.matrix_power(M0, order + 1), norm)
    return coeffs


def seb_polynomial_eval(coeffs: np.ndarray, theta: float) -> float:
    """Evaluate sum_k coeffs[k-1] * theta^k for the polynomial series bound."""
    powers = theta ** np.arange(1, len(coeffs) + 1)
    return float(np.asarray(coeffs) @ powers)


def series_expansion(
    pert: ScaledPerturbation, D, order: int, pi: ProbabilityMeasure | None = None
) -> np.ndarray:
    """Signed-measure approximation pi_P^T sum_{k<=order} M^k of pi_{P(theta)}.

    Every correction term has zero total mass, so the entries always sum to 1.
    When ||M|| < 1 and the mixed kernel is ergodic, the approximation error is
    bounded by a constant times ||M||^(order+1).
    """
    if order < 0:
        raise InvalidInput("order must be >= 0")
    M = pert.delta() @ np.asarray(D, dtype=float)
    if pi is None:
        pi = stationary_distribution(pert.pair.P)
    x = np.array(np.asarray(pi, dtype=float))
    total = x.copy()
    for _ in range(order):
        x = x @ M
        total += x
    return total


def bias_term_estimate(pert: ScaledPerturbation, D, n_steps: int) -> float:
    """Norm of pi_{P(theta)}^T M^n with M = theta (R - P) D.

    Under the contraction condition ||M|| < 1 this decays geometrically to
    zero; a persistent nonzero limit signals a multichain perturbation target.
    """
    if n_steps < 0:
        raise InvalidInput("n_steps must be >= 0")
    norm = pert.pair.norm
    M = pert.delta() @ np.asarray(D, dtype=float)
    x = np.array(stationary_distribution(pert.kernel()).w, dtype=float)
    for _ in range(n_steps):
        x = x @ M
    return measure_norm(x, norm)


@dataclass(frozen=True)
class ConditionReport:
    """One sufficient condition for the Neumann series of (I - (R-P)D)^{-1}."""

    name: str
    holds: bool
    quantity: float
    inverse_bound: float


def neumann_condition(
    pair: PerturbationPair, D, T, pi_norm: float
) -> tuple[ConditionReport, ConditionReport, ConditionReport]:
    """Evaluate the three nested sufficient conditions for the update resolvent.

    In decreasing sharpness (and increasing ease of evaluation):
    (i) ||(R-P)D|| < 1, (ii) ||R-P|| ||D|| < 1, and
    (iii) ||T|| + ||R-P||(1 + pi_norm) < 1, each with the induced bound on
    ||(I - (R-P)D)^{-1}||.  Any of them also forces the bias term to vanish.
    """
    norm = pair.norm
    diff = pair.difference()
    Dm = np.asarray(D, dtype=float)
    q1 = operator_norm(diff @ Dm, norm)
    q2 = operator_norm(diff, norm) * operator_norm(Dm, norm)
    t = operator_norm(np.asarray(T, dtype=float), norm)
    q3 = t + operator_norm(diff, norm) * (1.0 + pi_norm)
    bound1 = 1.0 / (1.0 - q1) if q1 < 1.0 else math.inf
    bound2 = 1.0 / (1.0 - q2) if q2 < 1.0 else math.inf
    bound3 = (1.0 - t) / (1.0 - q3) if q3 < 1.0 else math.inf
    return (
        ConditionReport("contraction", q1 < 1.0, q1, bound1),
        ConditionReport("norm_product", q2 < 1.0, q2, bound2),
        ConditionReport("taboo", q3 < 1.0, q3, bound3),
    )


def relative_errors(
    pert: ScaledPerturbation, reports: list[BoundReport]
) -> dict[str, float]:
    """Relative error (bound - truth) / truth for each report.

    The truth is a fresh LU stationary solve of the mixed kernel under each
    report's target norm, never the series approximation, so the oracle stays
    independent of the bounds under test.  Inapplicable bounds map to +inf.
    """
    pi_base = stationary_distribution(pert.pair.P).w
    pi_mixed = stationary_distribution(pert.kernel()).w
    diff = pi_mixed - pi_base
    out: dict[str, float] = {}
    for report in reports:
        truth = measure_norm(diff, report.target)
        if truth <= 0.0:
            raise DegeneratePerturbation("perturbation leaves the stationary distribution fixed")
        out[report.family] = (report.value - truth) / truth
    return out


def stability_domain(taboo_norm: float, diff_norm: float) -> float:
    """Certified theta range (1 - ||T||) / ||R - P|| for unique stationarity.

    Every theta strictly below the returned value keeps the mixed kernel
    positive recurrent with a unique stationary distribution.
    """
    if not np.isfinite(taboo_norm) or taboo_norm < 0.0:
        raise InvalidInput("taboo norm must be finite and nonnegative")
    if taboo_norm >= 1.0:
        raise NoCertificate(f"taboo kernel norm {taboo_norm:.6f} >= 1 certifies nothing")
    if not (np.isfinite(diff_norm) and diff_norm > 0.0):
        raise InvalidInput("difference norm must be finite and positive")
    return (1.0 - taboo_norm) / diff_norm
