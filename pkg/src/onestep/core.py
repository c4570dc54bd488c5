"""Data model and evaluation layer for weighted estimating equations.

The central objects are a fixed-design sample, a family of per-observation
estimating functions M_i(t, x) with derivatives in t, a family of
parameter-dependent weights h_i(t), and a moment provider giving
E M_i^2(t, X_i) and E M_i'(t, X_i) for variance work.

All reductions over observations go through math.fsum, which returns the
correctly rounded exact sum.  That makes every score sum reproducible
bitwise under permutation of the observation indices and under any chunked
evaluation order, which the simulation harness relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DegenerateError, DomainError, NonFiniteError

__all__ = [
    "FULL_LINE",
    "Interval",
    "Sample",
    "EstimatingFamily",
    "WeightFamily",
    "MomentProvider",
    "score_sums",
    "asymptotic_moments",
    "weight_values",
    "weight_prime_values",
    "m_values",
    "m_prime_values",
    "moment_values",
    "degeneracy_tolerance",
]

# Scale factor for relative degeneracy checks on signed sums.
DEGENERACY_SCALE = 1e-12


@dataclass(frozen=True)
class Interval:
    """Open interval (lo, hi).  Either bound may be infinite."""

    lo: float = -math.inf
    hi: float = math.inf

    def __post_init__(self) -> None:
        if math.isnan(self.lo) or math.isnan(self.hi) or not self.lo < self.hi:
            raise ValueError(f"invalid interval ({self.lo}, {self.hi})")

    def contains(self, t: float) -> bool:
        return self.lo < t < self.hi


FULL_LINE = Interval()


def _as_vector(name: str, values, *, n: int | None = None) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if arr.size == 0:
        raise ValueError(f"{name} must be nonempty")
    if n is not None and arr.size != n:
        raise ValueError(f"{name} has length {arr.size}, expected {n}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{name} contains non-finite entries")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Sample:
    """Observed responses with their fixed design covariates.

    x is required; a holds the primary covariate, b an optional secondary
    covariate, and w_known optional strictly positive known variance weights.
    All arrays are validated, copied, and frozen read-only.
    """

    x: np.ndarray
    a: np.ndarray
    b: np.ndarray | None = None
    w_known: np.ndarray | None = None

    def __post_init__(self) -> None:
        x = _as_vector("x", self.x)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "a", _as_vector("a", self.a, n=x.size))
        if self.b is not None:
            object.__setattr__(self, "b", _as_vector("b", self.b, n=x.size))
        if self.w_known is not None:
            w = _as_vector("w_known", self.w_known, n=x.size)
            if np.any(w <= 0.0):
                raise ValueError("w_known entries must be strictly positive")
            object.__setattr__(self, "w_known", w)

    @property
    def n(self) -> int:
        return int(self.x.size)


@dataclass(frozen=True)
class EstimatingFamily:
    """Per-observation estimating functions M_i(t, x) and their t-derivatives.

    m and m_prime are scalar evaluators (index, parameter, response).  The
    optional m_terms / m_prime_terms evaluate all indices at once against a
    response vector; they must agree bitwise with the scalar path and exist
    purely so large simulations stay vectorized.
    """

    m: Callable[[int, float, float], float]
    m_prime: Callable[[int, float, float], float]
    domain: Interval = FULL_LINE
    m_terms: Callable[[float, np.ndarray], np.ndarray] | None = None
    m_prime_terms: Callable[[float, np.ndarray], np.ndarray] | None = None


@dataclass(frozen=True)
class WeightFamily:
    """Parameter-dependent weights h_i(t), optionally with derivatives.

    h_prime is the analytic derivative of h when available.  Adapters that
    fall back to a finite-difference derivative mark it by setting
    h_prime_exact to False so downstream consumers can surface a warning.
    """

    h: Callable[[int, float], float]
    h_prime: Callable[[int, float], float] | None = None
    domain: Interval = FULL_LINE
    h_values: Callable[[float], np.ndarray] | None = None
    h_prime_values: Callable[[float], np.ndarray] | None = None
    h_prime_exact: bool = True


@dataclass(frozen=True)
class MomentProvider:
    """Supplies E M_i^2(t, X_i) >= 0 and E M_i'(t, X_i) for each index."""

    e_m2: Callable[[int, float], float]
    e_mprime: Callable[[int, float], float]
    e_m2_values: Callable[[float], np.ndarray] | None = None
    e_mprime_values: Callable[[float], np.ndarray] | None = None


def _require_in_domain(t: float, domain: Interval) -> None:
    if math.isnan(t) or math.isinf(t):
        raise NonFiniteError(f"parameter value {t!r} is not finite")
    if not domain.contains(t):
        raise DomainError(f"parameter {t!r} outside domain ({domain.lo}, {domain.hi})")


def _require_finite(name: str, terms: np.ndarray) -> None:
    if not np.all(np.isfinite(terms)):
        raise NonFiniteError(f"non-finite value in {name}")


def weight_values(wf: WeightFamily, t: float, n: int) -> np.ndarray:
    """Evaluate h_i(t) for i = 0..n-1 as a float64 vector."""
    if wf.h_values is not None:
        vals = np.asarray(wf.h_values(t), dtype=np.float64)
        if vals.size != n:
            raise ValueError(f"weight evaluator returned {vals.size} values, expected {n}")
        return vals
    return np.fromiter((wf.h(i, t) for i in range(n)), dtype=np.float64, count=n)


def weight_prime_values(wf: WeightFamily, t: float, n: int) -> np.ndarray:
    """Evaluate h_i'(t) for i = 0..n-1; requires the family to carry it."""
    if wf.h_prime_values is not None:
        vals = np.asarray(wf.h_prime_values(t), dtype=np.float64)
        if vals.size != n:
            raise ValueError(f"weight derivative returned {vals.size} values, expected {n}")
        return vals
    if wf.h_prime is None:
        raise ValueError("weight family carries no derivative")
    return np.fromiter((wf.h_prime(i, t) for i in range(n)), dtype=np.float64, count=n)


def m_values(fam: EstimatingFamily, t: float, xs: np.ndarray) -> np.ndarray:
    """Evaluate M_i(t, x_i) across the sample."""
    if fam.m_terms is not None:
        return np.asarray(fam.m_terms(t, xs), dtype=np.float64)
    n = xs.size
    return np.fromiter((fam.m(i, t, xs[i]) for i in range(n)), dtype=np.float64, count=n)


def m_prime_values(fam: EstimatingFamily, t: float, xs: np.ndarray) -> np.ndarray:
    """Evaluate M_i'(t, x_i) across the sample."""
    if fam.m_prime_terms is not None:
        vals = np.asarray(fam.m_prime_terms(t, xs), dtype=np.float64)
        if vals.ndim == 0:
            vals = np.full(xs.size, float(vals))
        return vals
    n = xs.size
    return np.fromiter((fam.m_prime(i, t, xs[i]) for i in range(n)), dtype=np.float64, count=n)


def moment_values(mp: MomentProvider, theta: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate (E M_i^2, E M_i') vectors at theta."""
    if mp.e_m2_values is not None:
        e2 = np.asarray(mp.e_m2_values(theta), dtype=np.float64)
    else:
        e2 = np.fromiter((mp.e_m2(i, theta) for i in range(n)), dtype=np.float64, count=n)
    if mp.e_mprime_values is not None:
        ed = np.asarray(mp.e_mprime_values(theta), dtype=np.float64)
    else:
        ed = np.fromiter((mp.e_mprime(i, theta) for i in range(n)), dtype=np.float64, count=n)
    if e2.size != n or ed.size != n:
        raise ValueError("moment provider returned wrong number of values")
    _require_finite("second moments", e2)
    _require_finite("derivative moments", ed)
    if np.any(e2 < 0.0):
        raise ValueError("E M^2 must be nonnegative")
    return e2, ed


def degeneracy_tolerance(terms: np.ndarray) -> float:
    """Relative tolerance below which a signed sum of these terms counts as zero."""
    return DEGENERACY_SCALE * (1.0 + math.fsum(np.abs(terms)))


def score_sums(
    fam: EstimatingFamily, wf: WeightFamily, t: float, s: Sample
) -> tuple[float, float]:
    """Weighted score sum and its t-derivative sum at t.

    Returns (sum_i h_i(t) M_i(t, x_i), sum_i h_i(t) M_i'(t, x_i)).  Both
    reductions are exact (correctly rounded), hence invariant bitwise under
    permutation of the observation indices.

    Raises DomainError if t is outside either family's domain and
    NonFiniteError if any term fails to be finite.
    """
    _require_in_domain(t, fam.domain)
    _require_in_domain(t, wf.domain)
    h = weight_values(wf, t, s.n)
    num_terms = h * m_values(fam, t, s.x)
    den_terms = h * m_prime_values(fam, t, s.x)
    _require_finite("score terms", num_terms)
    _require_finite("score derivative terms", den_terms)
    return math.fsum(num_terms), math.fsum(den_terms)


def asymptotic_moments(
    mp: MomentProvider, wf: WeightFamily, theta: float, n: int
) -> tuple[float, float]:
    """Variance and centering sums (I, J) of the weighted estimating equation.

    I = sum_i h_i(theta)^2 E M_i^2(theta, X_i),
    J = sum_i h_i(theta) E M_i'(theta, X_i).

    The ratio I / J^2 is the asymptotic variance of the normalized estimator
    and is invariant under rescaling every h_i by the same nonzero constant.

    Raises DegenerateError when I vanishes or J is numerically zero.
    """
    _require_in_domain(theta, wf.domain)
    if n < 1:
        raise ValueError("n must be at least 1")
    h = weight_values(wf, theta, n)
    _require_finite("weights", h)
    e2, ed = moment_values(mp, theta, n)
    i_terms = h * h * e2
    j_terms = h * ed
    i_nh = math.fsum(i_terms)
    j_nh = math.fsum(j_terms)
    if i_nh <= 0.0:
        raise DegenerateError("variance sum I is zero")
    if abs(j_nh) <= degeneracy_tolerance(j_terms):
        raise DegenerateError("centering sum J is numerically zero")
    return i_nh, j_nh
