"""Performance analysis of the binary RPT detector and related figures of merit.

Both quadratic forms ``y'Ay`` and ``y'By`` are non-central chi-squared.  When
``L = lcm(T0, T1)`` the difference-set projectors are orthogonal, the forms are
independent, and the statistic has an exact density written as a Poisson
mixture of densities of differences of central chi-squared variables, each
expressed with the confluent hypergeometric function of the second kind::

    psi(a, b; x) = Gamma(a)^-1  int_0^inf exp(-x t) t^(a-1) (1+t)^(b-a-1) dt

For arbitrary ``L`` a Gaussian with the exact first two moments is used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
import scipy.integrate
import scipy.special
import scipy.stats
from scipy.special import gammaln

from .detector import Hypothesis, ProjectionOperator
from .errors import InvalidArgumentError, NumericError

SQRT2PI = math.sqrt(2.0 * math.pi)


# ---------------------------------------------------------------------------
# Q-function and friends
# ---------------------------------------------------------------------------

def q_function(x):
    """Standard normal tail probability, via ``erfc``."""
    return 0.5 * scipy.special.erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


def q_inverse(p):
    return math.sqrt(2.0) * scipy.special.erfcinv(2.0 * np.asarray(p, dtype=float))


def q_approx(x):
    """Closed-form tail approximation ``exp(-x^2/2) / (sqrt(2 pi) sqrt(1 + x^2))``, x > 0.

    Only the gap and error-exponent formulas use this; everything else calls
    :func:`q_function`.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise InvalidArgumentError("q_approx is defined for x > 0")
    out = np.exp(-0.5 * x * x) / (SQRT2PI * np.sqrt(1.0 + x * x))
    return float(out) if out.ndim == 0 else out


def wilson_interval(successes, n, z: float = 1.959963984540054):
    """Wilson score interval for a binomial proportion."""
    successes = np.asarray(successes, dtype=float)
    n = np.asarray(n, dtype=float)
    p = successes / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return centre - half, centre + half


# ---------------------------------------------------------------------------
# Chi-squared parameters
# ---------------------------------------------------------------------------

def snr(x_S: np.ndarray, K_S: np.ndarray, sigma2: float = 1.0, L: int | None = None) -> float:
    """Signal energy per sample over noise variance, ``||K_S x||^2 / (sigma2 L)``."""
    L = K_S.shape[0] if L is None else L
    if sigma2 <= 0 or L <= 0:
        raise InvalidArgumentError("sigma2 and L must be positive")
    s = K_S @ np.asarray(x_S, dtype=float)
    return float(s @ s) / (sigma2 * L)


@dataclass(frozen=True)
class ChiSquareParams:
    """Degrees of freedom and non-centralities of ``y'Ay`` and ``y'By`` under H0/H1.

    ``lam0B`` is the non-centrality of ``y'By`` under H0, and so on.
    ``cross_cov_base`` is ``sum_ij (A * B)_ij``, i.e. ``tr(AB)``.
    """

    r_A: int
    r_B: int
    lam0A: float
    lam0B: float
    lam1A: float
    lam1B: float
    cross_cov_base: float = 0.0

    def __post_init__(self):
        lams = (self.lam0A, self.lam0B, self.lam1A, self.lam1B)
        if min(lams) < 0:
            raise InvalidArgumentError("non-centrality parameters must be >= 0")

    @property
    def lambda2(self) -> dict[tuple[str, str], float]:
        return {("H0", "A"): self.lam0A, ("H0", "B"): self.lam0B,
                ("H1", "A"): self.lam1A, ("H1", "B"): self.lam1B}

    def is_orthogonal(self, rtol: float = 1e-8) -> bool:
        scale = max(1.0, self.lam0A + self.lam1B)
        return self.lam1A <= rtol * scale and self.lam0B <= rtol * scale


def _quad_form(mu: np.ndarray, op: ProjectionOperator) -> float:
    # clip tiny negative round-off from the projection
    return max(0.0, float(np.sum((mu @ op.basis) ** 2)))


def chi_params(x_S0, x_S1, K_S0, K_S1, A: ProjectionOperator,
               B: ProjectionOperator) -> ChiSquareParams:
    """Chi-squared parameters for signals ``K_S0 x_S0`` (H0) and ``K_S1 x_S1`` (H1)."""
    mu0 = np.asarray(K_S0, float) @ np.asarray(x_S0, float)
    mu1 = np.asarray(K_S1, float) @ np.asarray(x_S1, float)
    if not (mu0.shape[0] == mu1.shape[0] == A.L == B.L):
        raise InvalidArgumentError("signal lengths and projector sizes disagree")
    return ChiSquareParams(
        r_A=int(round(np.trace(A.P))), r_B=int(round(np.trace(B.P))),
        lam0A=_quad_form(mu0, A), lam0B=_quad_form(mu0, B),
        lam1A=_quad_form(mu1, A), lam1B=_quad_form(mu1, B),
        cross_cov_base=float(np.sum(A.P * B.P)))


# ---------------------------------------------------------------------------
# Confluent hypergeometric psi
# ---------------------------------------------------------------------------

def _log_integrand(tau, a, b, x):
    # log of exp(-tau) tau^(a-1) (1 + tau/x)^(b-a-1); tau broadcast against x
    return -tau + (a - 1.0) * np.log(tau) + (b - a - 1.0) * np.log1p(tau / x)


def log_confluent_psi(a: float, b: float, x, epsrel: float = 1e-10) -> np.ndarray:
    """``log psi(a, b; x)`` for an array of ``x > 0``.

    With ``t = tau / x`` the integral becomes
    ``x^-a int exp(-tau) tau^(a-1) (1 + tau/x)^(b-a-1) d tau`` whose mass sits at
    ``tau = O(a + b)`` for every ``x``, so one adaptive rule serves the whole
    vector.  The integrand is normalised per ``x`` by its approximate maximum.
    ``[0, 1]`` is integrated in ``u = tau^a`` to remove the endpoint
    singularity; ``[1, inf)`` in ``s = tau - 1`` on the exponential tail.
    """
    if a <= 0:
        raise InvalidArgumentError("psi requires a > 0")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(~(x > 0)):
        raise InvalidArgumentError("psi requires x > 0")
    probe = np.geomspace(1e-3, 4.0 * (abs(a) + abs(b)) + 50.0, 96)
    scale = np.max(_log_integrand(probe[:, None], a, b, x[None, :]), axis=0)

    def head(u):
        tau = u ** (1.0 / a) if u > 0 else 0.0
        val = -tau + (b - a - 1.0) * np.log1p(tau / x) - scale
        return np.exp(val) / a

    def tail(s):
        return np.exp(_log_integrand(1.0 + s, a, b, x) - scale)

    kw = dict(epsrel=epsrel, epsabs=0.0, norm="max", limit=2000)
    i_head, err_head = scipy.integrate.quad_vec(head, 0.0, 1.0, **kw)
    i_tail, err_tail = scipy.integrate.quad_vec(tail, 0.0, np.inf, **kw)
    total = i_head + i_tail
    if not np.all(np.isfinite(total)) or np.any(total <= 0):
        raise NumericError(f"psi({a}, {b}; x) quadrature failed")
    return -a * np.log(x) + scale + np.log(total) - gammaln(a)


def confluent_psi(a: float, b: float, x, epsrel: float = 1e-10):
    """Tricomi-type confluent hypergeometric function ``psi(a, b; x)`` by quadrature."""
    out = np.exp(log_confluent_psi(a, b, x, epsrel))
    return float(out[0]) if np.ndim(x) == 0 else out


# ---------------------------------------------------------------------------
# Exact density (orthogonal case)
# ---------------------------------------------------------------------------

def chi2_difference_pdf(t, a: int, b: int) -> np.ndarray:
    """Density of ``U - V`` for independent central ``U ~ chi2_a``, ``V ~ chi2_b``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros_like(t)
    if a == 0 and b == 0:
        raise InvalidArgumentError("at least one side needs degrees of freedom")
    if b == 0:
        return scipy.stats.chi2.pdf(t, a)
    if a == 0:
        return scipy.stats.chi2.pdf(-t, b)
    c = 0.5 * (a + b)
    log2c = c * math.log(2.0)
    pos, neg, zero = t > 0, t < 0, t == 0
    if pos.any():
        tp = t[pos]
        out[pos] = np.exp(-log2c - gammaln(a / 2) + (c - 1) * np.log(tp) - tp / 2
                          + log_confluent_psi(b / 2, c, tp))
    if neg.any():
        tn = -t[neg]
        out[neg] = np.exp(-log2c - gammaln(b / 2) + (c - 1) * np.log(tn) - tn / 2
                          + log_confluent_psi(a / 2, c, tn))
    if zero.any():
        out[zero] = (math.exp(gammaln(c - 1) - log2c - gammaln(a / 2) - gammaln(b / 2))
                     if c > 1 else np.inf)
    return out


def _poisson_terms(lam2: float, tol: float) -> tuple[np.ndarray, np.ndarray]:
    mean = lam2 / 2.0
    if mean <= 0:
        return np.array([0]), np.array([1.0])
    lo = int(scipy.stats.poisson.ppf(tol / 2, mean)) if mean > 10 else 0
    hi = int(scipy.stats.poisson.isf(tol / 2, mean)) + 1
    k = np.arange(lo, hi + 1)
    return k, scipy.stats.poisson.pmf(k, mean)


def exact_pdf(t, params: ChiSquareParams, hypothesis, tol: float = 1e-10):
    """Exact density of ``l(y)`` under ``hypothesis`` for orthogonal-case parameters.

    The Poisson series is truncated once the omitted weight falls below ``tol``.
    """
    if not params.is_orthogonal():
        raise InvalidArgumentError(
            "exact density needs orthogonal-case parameters (lam1A = lam0B = 0)")
    hyp = Hypothesis(_hyp_index(hypothesis))
    scalar = np.ndim(t) == 0
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros_like(t)
    if hyp is Hypothesis.H1:
        k, w = _poisson_terms(params.lam1B, tol)
        for ki, wi in zip(k, w):
            out += wi * chi2_difference_pdf(t, params.r_B + 2 * int(ki), params.r_A)
    else:
        k, w = _poisson_terms(params.lam0A, tol)
        for ki, wi in zip(k, w):
            out += wi * chi2_difference_pdf(t, params.r_B, params.r_A + 2 * int(ki))
    out = np.maximum(out, 0.0)
    return float(out[0]) if scalar else out


def _hyp_index(hypothesis) -> int:
    if isinstance(hypothesis, str):
        return {"H0": 0, "H1": 1}[hypothesis.upper()]
    return int(hypothesis)


# ---------------------------------------------------------------------------
# Distributions of the statistic
# ---------------------------------------------------------------------------

@dataclass
class StatisticDistribution:
    """Model of ``l(y)`` under one hypothesis: a Gaussian or the exact series."""

    kind: Literal["gaussian", "exact-series"]
    mean: float
    variance: float
    params: ChiSquareParams | None = None
    hypothesis: Hypothesis | None = None
    tol: float = 1e-10
    _grid: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False)

    def __post_init__(self):
        if not self.variance > 0:
            raise NumericError(f"non-positive variance {self.variance}")

    @property
    def sd(self) -> float:
        return math.sqrt(self.variance)

    def pdf(self, t):
        if self.kind == "gaussian":
            return scipy.stats.norm.pdf(t, self.mean, self.sd)
        return exact_pdf(t, self.params, self.hypothesis, self.tol)

    def _cdf_grid(self):
        # CDF at panel edges by 8-point Gauss-Legendre on each panel; 0 is an
        # edge so the kink of the density there never sits inside a panel.
        if self._grid is None:
            lo = self.mean - 12 * self.sd
            hi = self.mean + 12 * self.sd
            if self.params.r_A == 0:
                lo = 0.0
            if self.params.r_B == 0:
                hi = 0.0
            n_panels = 600
            edges = np.linspace(lo, hi, n_panels + 1)
            if lo < 0 < hi:
                edges = np.union1d(edges, [0.0])
            nodes, weights = np.polynomial.legendre.leggauss(8)
            left, width = edges[:-1], np.diff(edges)
            pts = left[:, None] + 0.5 * width[:, None] * (nodes[None, :] + 1.0)
            dens = self.pdf(pts.ravel()).reshape(pts.shape)
            panel = 0.5 * width * (dens @ weights)
            self._grid = (edges, np.concatenate([[0.0], np.cumsum(panel)]))
        return self._grid

    def total_mass(self) -> float:
        if self.kind == "gaussian":
            return 1.0
        return float(self._cdf_grid()[1][-1])

    def cdf(self, t):
        if self.kind == "gaussian":
            return scipy.stats.norm.cdf(t, self.mean, self.sd)
        edges, cum = self._cdf_grid()
        return np.interp(t, edges, cum, left=0.0, right=cum[-1])

    def sf(self, t):
        if self.kind == "gaussian":
            return scipy.stats.norm.sf(t, self.mean, self.sd)
        edges, cum = self._cdf_grid()
        return cum[-1] - np.interp(t, edges, cum, left=0.0, right=cum[-1])

    def ppf(self, p):
        if self.kind == "gaussian":
            return scipy.stats.norm.ppf(p, self.mean, self.sd)
        edges, cum = self._cdf_grid()
        keep = np.concatenate([[True], np.diff(cum) > 0])
        return np.interp(p, cum[keep], edges[keep])


def gaussian_orthogonal(params: ChiSquareParams):
    """Moment-matched Gaussians for the orthogonal case (``lam1A = lam0B = 0``)."""
    if not params.is_orthogonal():
        raise InvalidArgumentError("orthogonal-case parameters required")
    r = params.r_B - params.r_A
    v = 2.0 * (params.r_B + params.r_A)
    h0 = StatisticDistribution("gaussian", r - params.lam0A, v + 4 * params.lam0A,
                               params, Hypothesis.H0)
    h1 = StatisticDistribution("gaussian", r + params.lam1B, v + 4 * params.lam1B,
                               params, Hypothesis.H1)
    return h0, h1


def cross_covariance(params: ChiSquareParams, hypothesis) -> float:
    """``cov(y'By, y'Ay)``: ``4 lam_B + 2 sum(A*B)`` under H0, ``4 lam_A + ...`` under H1."""
    if _hyp_index(hypothesis) == 0:
        return 4.0 * params.lam0B + 2.0 * params.cross_cov_base
    return 4.0 * params.lam1A + 2.0 * params.cross_cov_base


def _general_moments(params: ChiSquareParams):
    p = params
    r = p.r_B - p.r_A
    mean0 = r + p.lam0B - p.lam0A
    mean1 = r + p.lam1B - p.lam1A
    var0 = (2 * (p.r_B + 2 * p.lam0B) + 2 * (p.r_A + 2 * p.lam0A)
            - 2 * cross_covariance(p, 0))
    var1 = (2 * (p.r_B + 2 * p.lam1B) + 2 * (p.r_A + 2 * p.lam1A)
            - 2 * cross_covariance(p, 1))
    return mean0, var0, mean1, var1


def gaussian_general(params: ChiSquareParams):
    """Gaussians with the exact mean and variance of ``l(y)`` for any ``L``."""
    mean0, var0, mean1, var1 = _general_moments(params)
    for v in (var0, var1):
        if not v > 1e-12:
            raise NumericError(f"degenerate geometry: statistic variance {v:.3g}")
    return (StatisticDistribution("gaussian", mean0, var0, params, Hypothesis.H0),
            StatisticDistribution("gaussian", mean1, var1, params, Hypothesis.H1))


def exact_distributions(params: ChiSquareParams, tol: float = 1e-10):
    """Exact-series distributions under H0 and H1 (orthogonal case)."""
    g0, g1 = gaussian_orthogonal(params)
    return (StatisticDistribution("exact-series", g0.mean, g0.variance, params, Hypothesis.H0, tol),
            StatisticDistribution("exact-series", g1.mean, g1.variance, params, Hypothesis.H1, tol))


# ---------------------------------------------------------------------------
# Detection probabilities and ROC
# ---------------------------------------------------------------------------

def pd_pf(gamma, dists):
    """``(P_D, P_F)`` at threshold ``gamma`` for the pair ``(H0 dist, H1 dist)``."""
    h0, h1 = dists
    return h1.sf(gamma), h0.sf(gamma)


@dataclass(frozen=True)
class RocCurve:
    """``(P_F, P_D)`` pairs ordered by decreasing threshold."""

    points: np.ndarray
    source: Literal["exact", "gaussian", "empirical"]
    gammas: np.ndarray | None = None

    @property
    def pf(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def pd(self) -> np.ndarray:
        return self.points[:, 1]


def roc_thresholds(dists, n_points: int = 201) -> np.ndarray:
    """Thresholds at quantiles of both hypotheses plus ``gamma = 0``, decreasing."""
    n_each = (n_points - 1) // 2
    probs = np.linspace(0.001, 0.999, n_each)
    extra = [0.0] * (n_points - 2 * n_each)
    gammas = np.concatenate([dists[0].ppf(probs), dists[1].ppf(probs), extra])
    return np.sort(gammas)[::-1]


def roc_curve(dists, gammas: np.ndarray | None = None, n_points: int = 201) -> RocCurve:
    if gammas is None:
        gammas = roc_thresholds(dists, n_points)
    gammas = np.sort(np.asarray(gammas, dtype=float))[::-1]
    pd, pf = pd_pf(gammas, dists)
    # keep P_D/P_F monotone along the list despite interpolation round-off
    pts = np.column_stack([np.maximum.accumulate(np.clip(pf, 0, 1)),
                           np.maximum.accumulate(np.clip(pd, 0, 1))])
    source = "gaussian" if dists[0].kind == "gaussian" else "exact"
    return RocCurve(pts, source, gammas)


def np_pd(alpha: float, params: ChiSquareParams) -> float:
    """Largest ``P_D`` at false-alarm level ``alpha`` under the Gaussian model."""
    if not 0 < alpha < 1:
        raise InvalidArgumentError("alpha must lie in (0, 1)")
    mean0, var0, mean1, var1 = _general_moments(params)
    p = params
    num = (q_inverse(alpha) * math.sqrt(var0)
           + p.lam0B + p.lam1A - p.lam0A - p.lam1B)
    # identical to (Qinv(alpha) sigma0 + mean0 - mean1) / sigma1
    return float(q_function(num / math.sqrt(var1)))


def deflection(x_S0, x_S1, K_S0, K_S1) -> float:
    """Squared distance between the two mean vectors, expanded term by term."""
    s0 = np.asarray(K_S0, float) @ np.asarray(x_S0, float)
    s1 = np.asarray(K_S1, float) @ np.asarray(x_S1, float)
    return float(s1 @ s1 + s0 @ s0 - s1 @ s0 - s0 @ s1)


def pmb_pd(alpha: float, x_S0, x_S1, K_S0, K_S1, sigma2: float = 1.0) -> float:
    """Perfect-measurement bound: ``Q(Qinv(alpha) - d)`` with known signals."""
    if not 0 < alpha < 1:
        raise InvalidArgumentError("alpha must lie in (0, 1)")
    d = math.sqrt(max(0.0, deflection(x_S0, x_S1, K_S0, K_S1)) / sigma2)
    return float(q_function(q_inverse(alpha) - d))


def gap(L, snr_lin):
    """Closed-form large-``L SNR`` gap between the bound and the detector."""
    ls = np.asarray(L, dtype=float) * np.asarray(snr_lin, dtype=float)
    if np.any(ls <= 0):
        raise InvalidArgumentError("L * SNR must be positive")
    e = np.exp(-ls / 2.0)
    out = e * (math.sqrt(2.0) - e) / (2.0 * math.sqrt(math.pi) * np.sqrt(ls))
    return float(out) if out.ndim == 0 else out


def gap_log_rate(L, snr_lin):
    """``|log gap| / (L SNR)``, which tends to a constant."""
    ls = np.asarray(L, dtype=float) * np.asarray(snr_lin, dtype=float)
    return np.abs(np.log(gap(L, snr_lin))) / ls


def p_e_binary(L, snr_lin):
    """High-SNR binary error probability ``exp(-LS/8) / (sqrt(2 pi) sqrt(LS/4))``."""
    ls = np.asarray(L, dtype=float) * np.asarray(snr_lin, dtype=float)
    if np.any(ls <= 0):
        raise InvalidArgumentError("L * SNR must be positive")
    out = np.exp(-ls / 8.0) / (SQRT2PI * np.sqrt(ls / 4.0))
    return float(out) if out.ndim == 0 else out


def p_e_average(confusion) -> float:
    """Mean over true classes of the misclassified fraction."""
    C = np.asarray(confusion, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise InvalidArgumentError("confusion matrix must be square")
    totals = C.sum(axis=1)
    if np.any(totals <= 0):
        raise InvalidArgumentError("every class needs at least one trial")
    return float(np.mean(1.0 - np.diag(C) / totals))


def floored_error_rate(errors: int, trials: int) -> float:
    """Empirical error rate, floored at ``1 / (2 trials)`` when no errors occur."""
    if trials <= 0:
        raise InvalidArgumentError("trials must be positive")
    return max(errors / trials, 1.0 / (2.0 * trials))


def error_exponent(P_e: float, L: float, snr_lin: float, trials: int | None = None) -> float:
    """``-log(P_e) / (L SNR)``.

    A zero ``P_e`` is floored at ``1 / (2 trials)`` when ``trials`` is given.
    """
    if P_e == 0 and trials:
        P_e = 1.0 / (2.0 * trials)
    if not 0 < P_e <= 1:
        raise InvalidArgumentError(f"P_e must lie in (0, 1], got {P_e}")
    return -math.log(P_e) / (L * snr_lin)


def _xlog2(a: float, b: float) -> float:
    return 0.0 if a == 0 else a * math.log2(b)


def itr(M: int, A: float, T: float) -> float:
    """Information transfer rate in bits per minute."""
    if M < 2 or not 0 <= A <= 1 or T <= 0:
        raise InvalidArgumentError("need M >= 2, 0 <= A <= 1 and T > 0")
    bits = math.log2(M) + _xlog2(A, A) + _xlog2(1 - A, (1 - A) / (M - 1))
    return bits * 60.0 / T


def analytic_error_probability(params: ChiSquareParams, gamma: float = 0.0) -> float:
    """Equal-prior error ``(1 - P_D + P_F) / 2`` under the general Gaussian model."""
    pd, pf = pd_pf(gamma, gaussian_general(params))
    return float(0.5 * (1.0 - pd + pf))


def linear_fit(x: Sequence[float], y: Sequence[float]) -> tuple[float, float, float]:
    """Least-squares ``(slope, intercept, R^2)``."""
    res = scipy.stats.linregress(np.asarray(x, float), np.asarray(y, float))
    return float(res.slope), float(res.intercept), float(res.rvalue ** 2)


def two_proportion_test(k1: int, n1: int, k2: int, n2: int) -> tuple[float, float]:
    """Pooled two-proportion z test of ``p1 > p2``; returns ``(z, one-sided p)``."""
    if n1 <= 0 or n2 <= 0:
        raise InvalidArgumentError("sample sizes must be positive")
    p1, p2 = k1 / n1, k2 / n2
    pooled = (k1 + k2) / (n1 + n2)
    se = math.sqrt(pooled * (1 - pooled) * (1 / n1 + 1 / n2))
    if se == 0:
        return 0.0, 0.5 if p1 == p2 else (0.0 if p1 > p2 else 1.0)
    z = (p1 - p2) / se
    return z, float(q_function(z))
