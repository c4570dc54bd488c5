"""One-step estimators, studentization, weight optimality, and a root oracle.

A one-step estimator takes a preliminary value theta_star and performs a
single Newton update of the weighted estimating equation, with the weights
frozen at theta_star.  Its asymptotic variance is I/J^2 from
core.asymptotic_moments; the studentizer removes the unknown moments so
confidence intervals need no variance plug-in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    FULL_LINE,
    EstimatingFamily,
    Interval,
    MomentProvider,
    Sample,
    WeightFamily,
    _require_finite,
    _require_in_domain,
    degeneracy_tolerance,
    m_prime_values,
    m_values,
    moment_values,
    weight_prime_values,
    weight_values,
)
from .errors import (
    DegenerateDenominatorError,
    DegenerateError,
    DomainError,
    MissingDerivativeError,
    NoConvergenceError,
    SignMismatchError,
    ZeroVarianceError,
)
from .normal import normal_quantile

__all__ = [
    "EstimateResult",
    "one_step",
    "one_step_weighted",
    "one_step_factorized",
    "studentize",
    "studentize_unweighted",
    "optimal_weights",
    "efficiency_ratio",
    "newton_solve",
    "unit_weights",
]

# Sums of squares at or below this are treated as an exact zero.  A sum of
# squares cannot cancel, so any genuinely nonzero residual clears this floor,
# while a perfect fit (all terms zero) does not.
VARIANCE_FLOOR = 1e-300

MAX_HALVINGS = 50


@dataclass(frozen=True)
class EstimateResult:
    """A one-step estimate with the quantities needed to report it.

    denominator is the Newton denominator actually used by the producing
    operation (sign convention follows that operation's update formula).
    d_star and ci are filled by studentization when requested.
    """

    theta_star: float
    theta_hat: float
    denominator: float
    d_star: float | None = None
    ci: tuple[float, float] | None = None


def unit_weights(domain: Interval = FULL_LINE) -> WeightFamily:
    """The constant weight family h_i(t) = 1."""
    return WeightFamily(
        h=lambda i, t: 1.0,
        h_prime=lambda i, t: 0.0,
        domain=domain,
    )


def _newton_update(
    theta_star: float, num_terms: np.ndarray, den_terms: np.ndarray
) -> EstimateResult:
    _require_finite("score terms", num_terms)
    _require_finite("score derivative terms", den_terms)
    num = math.fsum(num_terms)
    den = math.fsum(den_terms)
    if abs(den) <= degeneracy_tolerance(den_terms):
        raise DegenerateDenominatorError(
            f"one-step denominator {den!r} is numerically zero"
        )
    theta_hat = theta_star - num / den
    if not math.isfinite(theta_hat):
        raise DegenerateDenominatorError("one-step update is not finite")
    return EstimateResult(theta_star=theta_star, theta_hat=theta_hat, denominator=den)


def one_step(fam: EstimatingFamily, theta_star: float, s: Sample) -> EstimateResult:
    """Single Newton step on sum_i M_i(t, x_i) from theta_star."""
    _require_in_domain(theta_star, fam.domain)
    num_terms = m_values(fam, theta_star, s.x)
    den_terms = m_prime_values(fam, theta_star, s.x)
    return _newton_update(theta_star, num_terms, den_terms)


def one_step_weighted(
    fam: EstimatingFamily, wf: WeightFamily, theta_star: float, s: Sample
) -> EstimateResult:
    """Single Newton step on sum_i h_i(t) M_i(t, x_i), weights frozen at theta_star.

    theta_hat = theta_star - sum h_i M_i / sum h_i M_i', both sums at
    theta_star.  Invariant under h -> c h for any c != 0.
    """
    _require_in_domain(theta_star, fam.domain)
    _require_in_domain(theta_star, wf.domain)
    h = weight_values(wf, theta_star, s.n)
    num_terms = h * m_values(fam, theta_star, s.x)
    den_terms = h * m_prime_values(fam, theta_star, s.x)
    return _newton_update(theta_star, num_terms, den_terms)


def one_step_factorized(
    fam: EstimatingFamily, wf: WeightFamily, theta_star: float, s: Sample
) -> EstimateResult:
    """One-step variant whose denominator differentiates the weights too.

    theta_hat = theta_star - sum h_i M_i / (sum h_i M_i' + sum h_i' M_i).
    Requires the weight family to carry its derivative.
    """
    if wf.h_prime is None and wf.h_prime_values is None:
        raise MissingDerivativeError("weight family carries no derivative")
    _require_in_domain(theta_star, fam.domain)
    _require_in_domain(theta_star, wf.domain)
    h = weight_values(wf, theta_star, s.n)
    hp = weight_prime_values(wf, theta_star, s.n)
    m = m_values(fam, theta_star, s.x)
    num_terms = h * m
    den_terms = np.concatenate([h * m_prime_values(fam, theta_star, s.x), hp * m])
    return _newton_update(theta_star, num_terms, den_terms)


def studentize(
    fam: EstimatingFamily,
    wf: WeightFamily,
    theta_star: float,
    theta_hat: float,
    s: Sample,
    alpha: float = 0.05,
) -> tuple[float, tuple[float, float]]:
    """Self-normalizing statistic d_star and a level (1 - alpha) interval.

    d_star = sum_i h_i(theta_star) M_i'(theta_star, x_i)
             / sqrt(sum_i h_i(theta_hat)^2 M_i(theta_hat, x_i)^2).

    The numerator is evaluated at the preliminary point, the denominator at
    the one-step point.  d_star * (theta_hat - theta) is asymptotically
    standard normal, so the interval is theta_hat -+ z_{1-alpha/2} / |d_star|.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")
    for t in (theta_star, theta_hat):
        _require_in_domain(t, fam.domain)
        _require_in_domain(t, wf.domain)
    num_terms = weight_values(wf, theta_star, s.n) * m_prime_values(fam, theta_star, s.x)
    _require_finite("studentizer numerator terms", num_terms)
    num = math.fsum(num_terms)
    if abs(num) <= degeneracy_tolerance(num_terms):
        raise DegenerateDenominatorError("studentizer centering sum is numerically zero")
    sq_terms = np.square(weight_values(wf, theta_hat, s.n) * m_values(fam, theta_hat, s.x))
    _require_finite("studentizer variance terms", sq_terms)
    ssq = math.fsum(sq_terms)
    if ssq <= VARIANCE_FLOOR:
        raise DegenerateDenominatorError("studentizer variance sum is zero")
    d_star = num / math.sqrt(ssq)
    half = normal_quantile(1.0 - 0.5 * alpha) / abs(d_star)
    return d_star, (theta_hat - half, theta_hat + half)


def studentize_unweighted(
    fam: EstimatingFamily,
    theta_star: float,
    theta_hat: float,
    s: Sample,
    alpha: float = 0.05,
) -> tuple[float, tuple[float, float]]:
    """studentize with unit weights."""
    return studentize(fam, unit_weights(fam.domain), theta_star, theta_hat, s, alpha)


def optimal_weights(mp: MomentProvider, theta: float, n: int) -> WeightFamily:
    """Variance-minimizing weights h_i = E M_i'(theta) / E M_i^2(theta).

    The returned family is constant in t (frozen at theta), with an exactly
    zero derivative.  Raises ZeroVarianceError if any second moment vanishes.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    e2, ed = moment_values(mp, theta, n)
    if np.any(e2 == 0.0):
        raise ZeroVarianceError("optimal weights undefined where E M^2 = 0")
    ho = ed / e2
    ho.flags.writeable = False
    return WeightFamily(
        h=lambda i, t: float(ho[i]),
        h_prime=lambda i, t: 0.0,
        domain=FULL_LINE,
        h_values=lambda t: ho,
        h_prime_values=lambda t: np.zeros(n),
    )


def efficiency_ratio(
    wf: WeightFamily, mp: MomentProvider, theta: float, n: int
) -> tuple[float, float]:
    """Variance ratio of a weight family against the optimal family, with bound.

    ratio = (I_h / J_h^2) / (I_opt / J_opt^2) >= 1, where the optimal variance
    is (sum_i (E M_i')^2 / E M_i^2)^-1.

    bound = 1 + (sqrt(H/h) - 1)^2 / (2 sqrt(H/h)) with h and H the smallest
    and largest of h_i(theta) / h_opt_i(theta) over indices with E M_i' != 0.
    Note the provable guarantee is ratio <= bound^2; ratio <= bound itself
    can fail (see the test suite for a two-point counterexample).

    The ratio is invariant under a global sign flip of the weights, so a
    family whose ratios are all negative is flipped before the sign check;
    mixed signs raise SignMismatchError.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    _require_in_domain(theta, wf.domain)
    h = weight_values(wf, theta, n)
    _require_finite("weights", h)
    e2, ed = moment_values(mp, theta, n)
    if np.any(e2 == 0.0):
        raise ZeroVarianceError("optimal weights undefined where E M^2 = 0")
    active = ed != 0.0
    if not np.any(active):
        raise DegenerateError("every E M_i' is zero; no information at theta")
    ratios = h[active] * e2[active] / ed[active]
    if np.all(ratios < 0.0):
        ratios = -ratios
    elif not np.all(ratios > 0.0):
        raise SignMismatchError(
            "weight signs do not match the optimal weight signs at every index"
        )
    i_terms = h * h * e2
    j_terms = h * ed
    i_nh = math.fsum(i_terms)
    j_nh = math.fsum(j_terms)
    if abs(j_nh) <= degeneracy_tolerance(j_terms):
        raise DegenerateError("centering sum J is numerically zero")
    quality = math.fsum(ed[active] * ed[active] / e2[active])
    ratio = (i_nh / (j_nh * j_nh)) * quality
    spread = float(np.max(ratios) / np.min(ratios))
    root = math.sqrt(spread)
    bound = 1.0 + (root - 1.0) ** 2 / (2.0 * root)
    return ratio, bound


def newton_solve(
    fam: EstimatingFamily,
    wf: WeightFamily,
    theta_start: float,
    s: Sample,
    max_iter: int = 100,
    tol: float = 1e-10,
) -> float:
    """Damped Newton root of the weighted score with weights frozen at the start.

    Solves sum_i h_i(theta_start) M_i(t, x_i) = 0 for t, halving each Newton
    step (at most 50 times) until the absolute score decreases and the
    iterate stays inside the family domain.  Returns t with |score(t)| <= tol.

    Raises NoConvergenceError when the budget is exhausted and
    DegenerateDenominatorError when the score derivative is numerically zero.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    if not tol > 0.0:
        raise ValueError("tol must be positive")
    _require_in_domain(theta_start, fam.domain)
    _require_in_domain(theta_start, wf.domain)
    h = weight_values(wf, theta_start, s.n)
    _require_finite("weights", h)

    def score(t: float) -> float:
        terms = h * m_values(fam, t, s.x)
        _require_finite("score terms", terms)
        return math.fsum(terms)

    t = float(theta_start)
    g = score(t)
    for _ in range(max_iter):
        if abs(g) <= tol:
            return t
        der_terms = h * m_prime_values(fam, t, s.x)
        _require_finite("score derivative terms", der_terms)
        der = math.fsum(der_terms)
        if abs(der) <= degeneracy_tolerance(der_terms):
            raise DegenerateDenominatorError("score derivative is numerically zero")
        step = g / der
        accepted = False
        for _ in range(MAX_HALVINGS + 1):
            candidate = t - step
            if fam.domain.contains(candidate) and wf.domain.contains(candidate):
                g_cand = score(candidate)
                if abs(g_cand) < abs(g):
                    t, g = candidate, g_cand
                    accepted = True
                    break
            step *= 0.5
        if not accepted:
            raise NoConvergenceError(
                "damped step failed to decrease the score within 50 halvings"
            )
    if abs(g) <= tol:
        return t
    raise NoConvergenceError(f"no root located within {max_iter} iterations")
