"""GLM families as data: cumulant, derivatives, curvature-rate certificate.

A family bundles the canonical-link cumulant a(t) with its first two
derivatives, a certified lower-rate function r for the local expansion

    a(t + h) >= a(t) + h * a'(t) + r(|h|) * a''(t) / 2,

the coefficients (r1, r2) of the small-increment envelope
r(h) >= h^2 / (r1 + r2 * h), exact per-interval extremes of a'' (used by the
curvature certificates), and the base-measure term that upgrades the
canonical log-likelihood to a full log-density (needed when comparing
against closed-form evidence).

All callables are dtype-preserving numpy ufunc compositions so the grid
certification can run in extended precision.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import gammaln

from .errors import DomainError


def _sigmoid(t):
    # stable two-branch logistic, dtype preserving (scipy.expit is float64-only)
    t = np.asarray(t)
    out = np.empty_like(t, dtype=t.dtype if t.dtype.kind == "f" else np.float64)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _softplus(t):
    t = np.asarray(t)
    return np.logaddexp(np.asarray(0.0, dtype=t.dtype), t)


@dataclass(frozen=True)
class GlmFamily:
    """A one-parameter exponential family in canonical form.

    Attributes
    ----------
    name : str
    a, a1, a2 : vectorized cumulant and its first/second derivatives
    rate : certified rate function r(h), defined for h >= 0
    rate_coeffs : (r1, r2) with r(h) >= h^2 / (r1 + r2*h)
    a2_extremes : (lo, hi) arrays -> (min, max) of a'' over each [lo_i, hi_i]
    log_base_measure : y -> sum of log h(y_i); canonical + this = full density
    mean_ok : elementwise predicate for means in the family's open range
    linpred_cap : if set, line searches reject |x'beta| beyond this (overflow
        guard for exp-type cumulants)
    """

    name: str
    a: Callable
    a1: Callable
    a2: Callable
    rate: Callable
    rate_coeffs: tuple
    a2_extremes: Callable
    log_base_measure: Callable
    mean_ok: Callable
    linpred_cap: float | None = None


def _logistic_a2_extremes(lo, hi):
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    w = lambda t: _sigmoid(t) * _sigmoid(-t)
    wlo, whi = w(lo), w(hi)
    # w is unimodal with peak 1/4 at 0
    straddles = (lo <= 0) & (hi >= 0)
    v_sq = np.where(straddles, 0.25, np.maximum(wlo, whi))
    u_sq = np.minimum(wlo, whi)
    return u_sq, v_sq


def gaussian_family():
    return GlmFamily(
        name="gaussian",
        a=lambda t: np.asarray(t) ** 2 / 2,
        a1=lambda t: np.asarray(t),
        a2=lambda t: np.ones_like(np.asarray(t, dtype=float)
                                  if np.asarray(t).dtype.kind != "f"
                                  else np.asarray(t)),
        rate=lambda h: np.asarray(h) ** 2,
        rate_coeffs=(1.0, 0.0),
        a2_extremes=lambda lo, hi: (np.ones_like(np.asarray(lo, dtype=float)),
                                    np.ones_like(np.asarray(hi, dtype=float))),
        log_base_measure=lambda y: float(
            -0.5 * np.sum(np.asarray(y, dtype=float) ** 2)
            - 0.5 * len(np.atleast_1d(y)) * np.log(2 * np.pi)),
        mean_ok=lambda m: np.isfinite(m),
    )


def logistic_family():
    return GlmFamily(
        name="logistic",
        a=_softplus,
        a1=_sigmoid,
        a2=lambda t: _sigmoid(t) * _sigmoid(-np.asarray(t)),
        rate=lambda h: np.asarray(h) ** 2 / (np.asarray(h) + 2),
        rate_coeffs=(2.0, 1.0),
        a2_extremes=_logistic_a2_extremes,
        log_base_measure=lambda y: 0.0,
        mean_ok=lambda m: (np.asarray(m) > 0) & (np.asarray(m) < 1),
    )


def poisson_family():
    return GlmFamily(
        name="poisson",
        a=np.exp,
        a1=np.exp,
        a2=np.exp,
        rate=lambda h: np.asarray(h) ** 2 / (1 + np.asarray(h)),
        rate_coeffs=(1.0, 1.0),
        a2_extremes=lambda lo, hi: (np.exp(np.asarray(lo, dtype=float)),
                                    np.exp(np.asarray(hi, dtype=float))),
        log_base_measure=lambda y: float(-np.sum(gammaln(np.asarray(y, dtype=float) + 1))),
        mean_ok=lambda m: np.asarray(m) > 0,
        linpred_cap=50.0,
    )


_REGISTRY = {
    "gaussian": gaussian_family,
    "logistic": logistic_family,
    "poisson": poisson_family,
}


def get_family(name):
    """Look up a shipped family by name."""
    try:
        return _REGISTRY[name]()
    except KeyError:
        raise DomainError(f"unknown family {name!r}; known: {sorted(_REGISTRY)}")


def with_rate(family, rate, rate_coeffs):
    """Return a copy of `family` carrying a different candidate rate function
    (useful for certifying or refuting alternative rates)."""
    return dataclasses.replace(family, rate=rate, rate_coeffs=tuple(rate_coeffs))


def eval_cumulant(family, t):
    """Evaluate (a, a', a'') at t.  Raises DomainError on non-finite input."""
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise DomainError("non-finite value in cumulant argument")
    return family.a(t), family.a1(t), family.a2(t)


def rate(family, h):
    """Evaluate the family's rate function at h >= 0."""
    h = np.asarray(h, dtype=float)
    if np.any(h < 0) or not np.all(np.isfinite(h)):
        raise DomainError("rate function argument must be finite and >= 0")
    return family.rate(h)


@dataclass
class RateReport:
    """Grid certification result for a (family, rate) pair."""

    family: str
    tol: float
    violations: list  # (t, h, gap) triples with gap < -tol

    @property
    def ok(self):
        return not self.violations


def validate_rate(family, t_grid, h_grid, tol=1e-12):
    """Certify a(t+h) - a(t) - h a'(t) - r(|h|) a''(t)/2 >= -tol on a grid.

    The tolerance is absolute; the inequality is exact algebra, so the only
    slack needed is for rounding.  The sweep runs in extended precision so
    that rounding at large |t| (e.g. e^10 for the Poisson cumulant) stays
    well below the tolerance.
    """
    t = np.asarray(t_grid, dtype=np.longdouble)
    h = np.asarray(h_grid, dtype=np.longdouble)
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(h))):
        raise DomainError("rate grids must be finite")
    T, H = np.meshgrid(t, h, indexing="ij")
    gap = family.a(T + H) - (family.a(T) + H * family.a1(T)
                             + family.rate(np.abs(H)) * family.a2(T) / 2)
    bad = np.argwhere(gap < -tol)
    violations = [(float(t[i]), float(h[j]), float(gap[i, j])) for i, j in bad]
    return RateReport(family=family.name, tol=tol, violations=violations)


def _check_response(family, y):
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise DomainError("non-finite response value")
    if family.name == "logistic" and (np.any(y < 0) or np.any(y > 1)):
        raise DomainError("logistic response must lie in [0, 1]")
    if family.name == "poisson" and np.any(y < 0):
        raise DomainError("poisson response must be >= 0")
    return y


def log_likelihood(family, X, y, beta):
    """Canonical log-likelihood sum_i { y_i * x_i'beta - a(x_i'beta) }.

    This omits the base measure; use `log_likelihood_full` when an absolute
    normalization is needed (evidence comparisons).
    """
    X = np.asarray(X, dtype=float)
    y = _check_response(family, y)
    beta = np.asarray(beta, dtype=float)
    t = X @ beta
    if not np.all(np.isfinite(t)):
        raise DomainError("non-finite linear predictor")
    return float(np.sum(y * t - family.a(t)))


def log_likelihood_full(family, X, y, beta):
    """Full log-density: canonical part plus the base-measure term."""
    return log_likelihood(family, X, y, beta) + family.log_base_measure(np.asarray(y, dtype=float))
