"""Example chains with closed forms, random kernels, and the breakdown queue.

The two-state chain, ring network, and star network come with explicit
stationary distributions, deviation matrices, and condition numbers; they
serve as oracles for the numerical routes.  The queueing model is a single
server with Poisson arrivals whose server breaks down at each service start
with probability theta and is repaired at an exponential rate; its embedded
jump chain interpolates linearly between a stable queue (theta = 0) and a
pure birth process (theta = 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import poisson

from .bounds import BoundReport
from .core import (
    InvalidInput,
    Norm,
    OutOfDomain,
    StochasticMatrix,
    TabooNotProper,
    optimize_alpha,
)

__all__ = [
    "TwoStateParams",
    "two_state_kernel",
    "TwoStateForms",
    "two_state_closed_forms",
    "RingParams",
    "ring_kernel",
    "ring_deviation",
    "ring_kappa3",
    "StarParams",
    "star_kernel",
    "StarForms",
    "star_closed_forms",
    "random_chain",
    "Exponential",
    "AtomMixture",
    "QueueSpec",
    "mg1_breakdown_kernel",
    "QueueSsbCoefficients",
    "mg1_ssb_coefficients",
    "mg1_ssb_bound",
    "mg1_ssb_theta_domain",
    "mg1_stability_ratio",
    "mg1_stability_lower_bound",
    "TwoStateBounds",
    "two_state_bounds",
]

_B3_RELATIVE_TAIL = 1e-12


def _check_open_unit(value: float, name: str) -> float:
    if not (np.isfinite(value) and 0.0 < value < 1.0):
        raise InvalidInput(f"{name} must lie in the open interval (0, 1)")
    return float(value)


@dataclass(frozen=True)
class TwoStateParams:
    """Flip probabilities of the base kernel and of the perturbing kernel."""

    p: float
    q: float
    p_tilde: float
    q_tilde: float

    def __post_init__(self) -> None:
        for name in ("p", "q", "p_tilde", "q_tilde"):
            _check_open_unit(getattr(self, name), name)


def two_state_kernel(p: float, q: float) -> StochasticMatrix:
    """Kernel [[1-p, p], [q, 1-q]] with p, q in (0, 1)."""
    _check_open_unit(p, "p")
    _check_open_unit(q, "q")
    return StochasticMatrix([[1.0 - p, p], [q, 1.0 - q]])


@dataclass(frozen=True)
class TwoStateForms:
    """Closed forms for the two-state chain.

    pi = (q, p) / (p + q), deviation = [[p, -p], [-q, q]] / (p + q)^2,
    kappa3 = 1 / (2 (p + q)), kappa6 = 1 / (p + q).  The taboo norms refer to
    zeroing the first column (forbid entering state 0) or the first row.
    """

    p: float
    q: float
    pi: np.ndarray
    deviation: np.ndarray
    kappa3: float
    kappa6: float

    def taboo_norm_column_removed(self, alpha: float) -> float:
        return max(alpha * self.p, 1.0 - self.q)

    def taboo_norm_row_removed(self, alpha: float) -> float:
        return 1.0 + self.q * (1.0 - alpha) / alpha


def two_state_closed_forms(p: float, q: float) -> TwoStateForms:
    _check_open_unit(p, "p")
    _check_open_unit(q, "q")
    s = p + q
    pi = np.array([q, p]) / s
    deviation = np.array([[p, -p], [-q, q]]) / s**2
    return TwoStateForms(p, q, pi, deviation, 1.0 / (2.0 * s), 1.0 / s)


@dataclass(frozen=True)
class RingParams:
    n: int
    b: float

    def __post_init__(self) -> None:
        if self.n < 2:
            raise InvalidInput("ring needs at least two states")
        if not (np.isfinite(self.b) and 0.0 < self.b <= 0.5):
            raise InvalidInput("ring hop probability must lie in (0, 1/2]")


def ring_kernel(n: int, b: float) -> StochasticMatrix:
    """Symmetric nearest-neighbour walk on a cycle: hop rate b each way."""
    RingParams(n, b)
    P = np.zeros((n, n))
    for i in range(n):
        P[i, i] = 1.0 - 2.0 * b
        P[i, (i + 1) % n] += b
        P[i, (i - 1) % n] += b
    return StochasticMatrix(P)


def ring_deviation(n: int, b: float) -> np.ndarray:
    """Circulant deviation matrix of the ring.

    Entry (i, j) equals d_{(j-i) mod n} with
    d_k = (n-1)(n+1) / (12 b n) - (n-k) k / (2 b n); the d_k sum to zero.
    """
    RingParams(n, b)
    k = np.arange(n, dtype=float)
    d = (n - 1.0) * (n + 1.0) / (12.0 * b * n) - (n - k) * k / (2.0 * b * n)
    idx = (np.arange(n)[None, :] - np.arange(n)[:, None]) % n
    return d[idx]


def ring_kappa3(n: int, b: float) -> float:
    """kappa3 of the ring: floor(n/2) (n - floor(n/2)) / (4 b n); grows linearly in n."""
    RingParams(n, b)
    h = n // 2
    return h * (n - h) / (4.0 * b * n)


@dataclass(frozen=True)
class StarParams:
    n: int
    beta: float
    gamma: float

    def __post_init__(self) -> None:
        if self.n < 2:
            raise InvalidInput("star needs at least two states")
        if not (np.isfinite(self.beta) and 0.0 < self.beta <= 1.0):
            raise InvalidInput("hub exit probability must lie in (0, 1]")
        if not (np.isfinite(self.gamma) and 0.0 <= self.gamma < 1.0):
            raise InvalidInput("leaf hold probability must lie in [0, 1)")


def star_kernel(n: int, beta: float, gamma: float) -> StochasticMatrix:
    """Hub-and-leaves kernel: hub exits with rate beta, leaves hold with rate gamma."""
    StarParams(n, beta, gamma)
    P = np.zeros((n, n))
    P[0, 0] = 1.0 - beta
    P[0, 1:] = beta / (n - 1)
    P[1:, 0] = 1.0 - gamma
    P[np.arange(1, n), np.arange(1, n)] = gamma
    return StochasticMatrix(P)


@dataclass(frozen=True)
class StarForms:
    pi: np.ndarray
    deviation: np.ndarray
    kappa3: float
    kappa6: float


def star_closed_forms(n: int, beta: float, gamma: float) -> StarForms:
    """Closed forms for the star: block deviation matrix, kappa3 = 1 / (2 (1 - gamma))."""
    StarParams(n, beta, gamma)
    u = 1.0 - gamma
    w = u + beta
    pi = np.full(n, beta / ((n - 1) * w))
    pi[0] = u / w
    D = np.empty((n, n))
    D[0, 0] = beta / w**2
    D[0, 1:] = -beta / (w**2 * (n - 1))
    D[1:, 0] = -u / w**2
    D[1:, 1:] = -beta * (u + w) / (u * w**2 * (n - 1))
    D[np.arange(1, n), np.arange(1, n)] += 1.0 / u
    return StarForms(pi, D, 1.0 / (2.0 * u), 1.0 / u)


def random_chain(n: int, seed: int) -> StochasticMatrix:
    """Row-normalized iid uniform kernel; strictly positive, hence ergodic.

    Entries are drawn row-major from the counter-based Philox generator, so
    the result is reproducible bit-for-bit across platforms for a fixed seed.
    The draw is mapped to (0, 1] to keep every entry strictly positive.
    """
    if n < 2:
        raise InvalidInput("need at least two states")
    rng = np.random.Generator(np.random.Philox(seed))
    u = 1.0 - rng.random((n, n))
    return StochasticMatrix(u, renormalize=True)


@dataclass(frozen=True)
class Exponential:
    """Exponential service times with the given rate."""

    mu: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.mu) and self.mu > 0.0):
            raise InvalidInput("service rate must be positive")


@dataclass(frozen=True)
class AtomMixture:
    """Finite mixture of deterministic service times (x_k, w_k), sum w_k = 1."""

    points: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if not self.points:
            raise InvalidInput("atom mixture needs at least one atom")
        total = 0.0
        for x, wgt in self.points:
            if not (np.isfinite(x) and x >= 0.0):
                raise InvalidInput("service atoms must be nonnegative")
            if not (np.isfinite(wgt) and wgt > 0.0):
                raise InvalidInput("atom weights must be positive")
            total += wgt
        if abs(total - 1.0) > 1e-12:
            raise InvalidInput(f"atom weights sum to {total!r}, expected 1")


ServiceDistribution = Exponential | AtomMixture


def _service_poisson_terms(service: ServiceDistribution, lam: float, count: int) -> np.ndarray:
    """a_k = probability of k Poisson arrivals during one service, k < count."""
    k = np.arange(count)
    if isinstance(service, Exponential):
        ratio = lam / (lam + service.mu)
        return (service.mu / (lam + service.mu)) * ratio ** k.astype(float)
    terms = np.zeros(count)
    for x, wgt in service.points:
        terms += wgt * poisson.pmf(k, lam * x)
    return terms


def _service_poisson_tail(service: ServiceDistribution, lam: float, m: int) -> float:
    """Probability of at least m Poisson arrivals during one service."""
    if m <= 0:
        return 1.0
    if isinstance(service, Exponential):
        return (lam / (lam + service.mu)) ** m
    return float(sum(wgt * poisson.sf(m - 1, lam * x) for x, wgt in service.points))


@dataclass(frozen=True)
class QueueSpec:
    """Arrival rate, service distribution, repair rate, and truncation level.

    For exponential service the base chain must be stable: lam < mu.
    """

    lam: float
    service: ServiceDistribution
    repair_rate: float
    truncation: int

    def __post_init__(self) -> None:
        if not (np.isfinite(self.lam) and self.lam > 0.0):
            raise InvalidInput("arrival rate must be positive")
        if not (np.isfinite(self.repair_rate) and self.repair_rate > 0.0):
            raise InvalidInput("repair rate must be positive")
        if self.truncation < 1:
            raise InvalidInput("truncation level must be >= 1")
        if isinstance(self.service, Exponential) and self.lam >= self.service.mu:
            raise InvalidInput("base queue requires lam < mu for exponential service")


def mg1_breakdown_kernel(spec: QueueSpec, theta: float) -> StochasticMatrix:
    """Embedded jump chain of the breakdown queue, truncated to {0..N}.

    Rows mix the no-breakdown service term (weight 1 - theta, Poisson arrivals
    over one service) with the breakdown term (weight theta, geometric arrival
    count over one exponential repair).  All transition mass beyond state N is
    lumped into state N using the analytic tails of both components, so the
    lump carries the true tail mass (no rounding-noise floor that geometric
    norm weights would amplify) and the identity
    P_theta = (1 - theta) P_0 + theta P_1 holds entrywise by construction.
    """
    if not (np.isfinite(theta) and 0.0 <= theta <= 1.0):
        raise InvalidInput("breakdown probability must lie in [0, 1]")
    N = spec.truncation
    n = N + 1
    lam, r = spec.lam, spec.repair_rate
    a = _service_poisson_terms(spec.service, lam, N + 1)
    u = lam / (lam + r)
    g = (1.0 - u) * u ** np.arange(N + 1, dtype=float)
    P = np.zeros((n, n))
    # empty queue: j arrivals during the first service, or j - 1 during repair
    P[0, :N] = (1.0 - theta) * a[:N]
    P[0, 1:N] += theta * g[: N - 1]
    P[0, N] = (1.0 - theta) * _service_poisson_tail(spec.service, lam, N) + theta * u ** (N - 1)
    for i in range(1, n):
        width = N - i + 1  # states i-1 .. N-1 reachable without lumping
        P[i, i - 1 : N] = (1.0 - theta) * a[:width]
        if i < N:
            P[i, i:N] += theta * g[: N - i]
        P[i, N] = (1.0 - theta) * _service_poisson_tail(spec.service, lam, width) + theta * u ** (N - i)
    return StochasticMatrix(P)


def mg1_b1(lam: float, mu: float, alpha: float) -> float:
    """Raw taboo-norm coefficient lam mu alpha / ((mu+lam)(mu+lam(1-alpha))).

    Diverges as alpha approaches the transform edge (mu+lam)/lam; exposed
    without range checks for diagnostics.
    """
    return lam * mu * alpha / ((mu + lam) * (mu + lam * (1.0 - alpha)))


@dataclass(frozen=True)
class QueueSsbCoefficients:
    """Analytic ingredients of the queueing strong-stability bound.

    ``taboo_norm_bound`` dominates the taboo-kernel v-norm, ``pi_norm_bound``
    the v-norm of the stable queue's stationary distribution, and
    ``kernel_diff_bound`` the v-norm of P_1 - P_0.  ``alpha_ceiling`` is the
    transform edge (mu + lam) / lam beyond which nothing is finite.
    """

    alpha: float
    taboo_norm_bound: float
    pi_norm_bound: float
    kernel_diff_bound: float
    alpha_ceiling: float


def mg1_ssb_coefficients(
    lam: float, mu: float, r: float, alpha: float, pi0: float | None = None
) -> QueueSsbCoefficients:
    """Closed-form coefficient set for exponential service.

    ``pi0`` is the stationary probability of an empty queue; by default the
    exponential-service identity 1 - lam/mu is used, but a value from a
    truncated solve may be supplied instead.  Raises :class:`OutOfDomain`
    outside 1 <= alpha < (mu + lam)/lam and :class:`TabooNotProper` when the
    taboo coefficient reaches 1.
    """
    for value, name in ((lam, "lam"), (mu, "mu"), (r, "r")):
        if not (np.isfinite(value) and value > 0.0):
            raise InvalidInput(f"{name} must be positive")
    if lam >= mu:
        raise InvalidInput("requires a stable base queue: lam < mu")
    z = (mu + lam) / lam
    if not (1.0 <= alpha < z):
        raise OutOfDomain(f"alpha must lie in [1, {z:g})")
    b1 = mg1_b1(lam, mu, alpha)
    if b1 >= 1.0:
        raise TabooNotProper(f"taboo coefficient {b1:.6f} >= 1 at alpha={alpha:g}")
    if pi0 is None:
        pi0 = 1.0 - lam / mu
    if not (0.0 < pi0 <= 1.0):
        raise InvalidInput("pi0 must lie in (0, 1]")
    b2 = pi0 / (1.0 - b1)
    if mu == r:
        b3 = (mu / (lam + mu)) * (1.0 + alpha * mu / (mu + lam - alpha * lam))
    else:
        b3 = _b3_series(lam, mu, r, alpha)
    return QueueSsbCoefficients(alpha, b1, b2, b3, z)


def _b3_series(lam: float, mu: float, r: float, alpha: float) -> float:
    """Kernel-difference coefficient by series when repair and service rates differ.

    Both summand families are geometric with ratios alpha*lam/(lam+r) and
    alpha*lam/(lam+mu); summation stops once a geometric tail majorant drops
    below 1e-12 of the running value.
    """
    A = r / (r + lam)
    u = lam / (lam + r)
    C = lam * mu / (lam + mu) ** 2
    w = lam / (lam + mu)
    if alpha * u >= 1.0 or alpha * w >= 1.0:
        raise OutOfDomain("series for the kernel-difference coefficient diverges at this alpha")
    total = mu / (lam + mu)
    j = 0
    term_u = A * alpha  # A * u^j * alpha^{j+1}
    term_w = C * alpha
    while True:
        total += abs(term_u - term_w)
        term_u *= alpha * u
        term_w *= alpha * w
        tail = term_u / (1.0 - alpha * u) + term_w / (1.0 - alpha * w)
        if tail <= _B3_RELATIVE_TAIL * total:
            return total + 0.0
        j += 1
        if j > 10_000_000:  # pragma: no cover - ratios < 1 guarantee termination
            raise OutOfDomain("kernel-difference series failed to converge")


def mg1_ssb_bound(
    lam: float, mu: float, r: float, alpha: float, theta: float, pi0: float | None = None
) -> BoundReport:
    """Strong-stability bound on the stationary v-norm difference of the queue.

    Applicable while theta < (1 - b1) / ((1 + b2) b3) with the analytic
    coefficients; outside that range the report carries +inf.
    """
    if not (np.isfinite(theta) and 0.0 <= theta <= 1.0):
        raise InvalidInput("theta must lie in [0, 1]")
    coeffs = mg1_ssb_coefficients(lam, mu, r, alpha, pi0)
    b1, b2, b3 = coeffs.taboo_norm_bound, coeffs.pi_norm_bound, coeffs.kernel_diff_bound
    load = theta * (1.0 + b2) * b3
    slack = 1.0 - b1 - load
    target = Norm.v(alpha)
    if slack <= 0.0:
        return BoundReport.inapplicable("ssb", slack, target)
    return BoundReport("ssb", b2 * load / slack, True, slack, target)


def mg1_ssb_theta_domain(
    lam: float, mu: float, r: float, alpha: float, pi0: float | None = None
) -> float:
    """Largest theta below which the queueing strong-stability bound applies."""
    coeffs = mg1_ssb_coefficients(lam, mu, r, alpha, pi0)
    return (1.0 - coeffs.taboo_norm_bound) / (
        (1.0 + coeffs.pi_norm_bound) * coeffs.kernel_diff_bound
    )


def mg1_stability_ratio(lam: float, mu: float, r: float, alpha: float) -> float:
    """Certified-stability ratio (1 - b1(alpha)) / b3(alpha).

    For mu == r this equals
    ((mu+lam)^2 - lam (2 mu + lam) alpha) / (mu (mu + lam + alpha (mu - lam))).
    """
    coeffs = mg1_ssb_coefficients(lam, mu, r, alpha)
    return (1.0 - coeffs.taboo_norm_bound) / coeffs.kernel_diff_bound


def mg1_feasible_alpha_ceiling(lam: float, mu: float, r: float) -> float:
    """Largest weight base with a proper taboo coefficient and convergent series."""
    ceiling = (mu + lam) ** 2 / ((2.0 * mu + lam) * lam)
    ceiling = min(ceiling, (mu + lam) / lam)
    if mu != r:
        ceiling = min(ceiling, (lam + r) / lam)
    return ceiling


def mg1_stability_lower_bound(
    lam: float,
    mu: float,
    r: float,
    alpha_hi: float | None = None,
    grid: int = 2001,
) -> float:
    """Best certified breakdown probability over a weight-base grid.

    Maximizes the stability ratio over alpha in [1, min(alpha_hi, feasible));
    every theta strictly below the returned value leaves the mixed chain with
    a unique stationary distribution.
    """
    ceiling = mg1_feasible_alpha_ceiling(lam, mu, r)
    if alpha_hi is not None:
        if alpha_hi < 1.0:
            raise InvalidInput("alpha_hi must be >= 1")
        ceiling = min(ceiling, alpha_hi)
    hi = ceiling * (1.0 - 1e-12)
    if hi <= 1.0:
        return mg1_stability_ratio(lam, mu, r, 1.0)

    def negated(alpha: float) -> float:
        try:
            return -mg1_stability_ratio(lam, mu, r, alpha)
        except (OutOfDomain, TabooNotProper):
            return math.inf

    _, neg_best = optimize_alpha(negated, 1.0, hi, grid)
    return -neg_best


@dataclass(frozen=True)
class TwoStateBounds:
    """Closed-form values of the five bound families for the two-state chain.

    Entries are +inf where the family's applicability condition fails at the
    requested theta.  ``cnb_over_seb0`` is the quality ratio of the
    condition-number bound against the order-0 series bound; it is always
    at least 1.
    """

    cnb: float
    ssb: float
    db: float
    seb0: float
    seb1: float
    cnb_over_seb0: float


def two_state_bounds(params: TwoStateParams, alpha: float, theta: float) -> TwoStateBounds:
    """Evaluate the explicit two-state bound formulas at one (alpha, theta).

    The strong-stability form uses the cheaper of the two column-removal
    taboo kernels; its off-1 weight-base variant matches the generic route
    only at alpha = 1, which is where cross-checks are run.
    """
    if alpha < 1.0:
        raise InvalidInput("weight base must be >= 1")
    if not (0.0 <= theta <= 1.0):
        raise InvalidInput("theta must lie in [0, 1]")
    p, q, pt, qt = params.p, params.q, params.p_tilde, params.q_tilde
    s = p + q
    dp, dq = abs(p - pt), abs(q - qt)
    m_v = max(dp, dq / alpha)
    diff_v = theta * (1.0 + alpha) * m_v  # ||P(theta) - P||_v
    det = abs(p * qt - pt * q)
    pi_v = (q + p * alpha) / s

    cnb = theta * ((1.0 + alpha) / s) ** 2 * max(alpha * dp, dq) * max(p, q / alpha)

    t = min(max(alpha * p, 1.0 - q), max(1.0 - p, q))
    ssb_slack = 1.0 - t - (1.0 + pi_v) * diff_v
    ssb = pi_v * (1.0 + pi_v) * diff_v / ssb_slack if ssb_slack > 0.0 else math.inf

    db_slack = s - theta * (1.0 + alpha) * m_v
    db = theta * det * (1.0 + alpha) / (s * db_slack) if db_slack > 0.0 else math.inf

    seb0 = theta * (1.0 + alpha) / s * max(alpha * dp, dq)
    seb1 = (
        theta
        * (1.0 + alpha)
        / s**2
        * (det + theta * abs(p - pt + q - qt) * max(alpha * dp, dq))
    )
    ratio = (1.0 + alpha) / s * max(p, q / alpha)
    return TwoStateBounds(cnb, ssb, db, seb0, seb1, ratio)
