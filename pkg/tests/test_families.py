"""Family definitions: cumulants, derivatives, rate certification, likelihoods."""

import numpy as np
import pytest
from scipy.stats import bernoulli, norm, poisson

from evbounds import (
    DomainError,
    eval_cumulant,
    get_family,
    log_likelihood,
    log_likelihood_full,
    rate,
    validate_rate,
    with_rate,
)

GAUSS = get_family("gaussian")
LOGIT = get_family("logistic")
POIS = get_family("poisson")


def test_cumulant_values_at_zero_and_two():
    a, a1, a2 = eval_cumulant(POIS, 0.0)
    assert (float(a), float(a1), float(a2)) == (1.0, 1.0, 1.0)
    a, a1, a2 = eval_cumulant(LOGIT, 0.0)
    assert np.allclose([a, a1, a2], [np.log(2.0), 0.5, 0.25], atol=1e-15)
    a, a1, a2 = eval_cumulant(GAUSS, 2.0)
    assert (float(a), float(a1), float(a2)) == (2.0, 2.0, 1.0)


def test_unknown_family_raises():
    with pytest.raises(DomainError):
        get_family("gamma")


@pytest.mark.parametrize("fam", [GAUSS, LOGIT, POIS])
def test_derivatives_match_finite_differences(fam):
    t = np.linspace(-3, 3, 41)
    h = 1e-6
    fd1 = (fam.a(t + h) - fam.a(t - h)) / (2 * h)
    fd2 = (fam.a1(t + h) - fam.a1(t - h)) / (2 * h)
    assert np.allclose(fd1, fam.a1(t), rtol=1e-7, atol=1e-7)
    assert np.allclose(fd2, fam.a2(t), rtol=1e-6, atol=1e-6)


def test_logistic_stability_at_extreme_arguments():
    t = np.array([-800.0, 800.0])
    a = LOGIT.a(t)
    assert np.all(np.isfinite(a))
    assert a[0] == 0.0 and abs(a[1] - 800.0) < 1e-12
    s = LOGIT.a1(t)
    assert s[0] == 0.0 and s[1] == 1.0


def test_dtype_preservation_for_extended_precision():
    t = np.linspace(-5, 5, 11).astype(np.longdouble)
    for fam in (GAUSS, LOGIT, POIS):
        assert fam.a(t).dtype == np.longdouble
        assert fam.a1(t).dtype == np.longdouble


def test_rate_values():
    assert float(rate(LOGIT, 2.0)) == 1.0            # h^2/(h+2) at 2
    for fam in (GAUSS, LOGIT, POIS):
        assert float(rate(fam, 0.0)) == 0.0
    assert float(rate(POIS, 1.0)) == 0.5             # corrected h^2/(1+h)


def test_rate_rejects_negative_or_nonfinite():
    with pytest.raises(DomainError):
        rate(GAUSS, -0.5)
    with pytest.raises(DomainError):
        rate(GAUSS, np.nan)


def test_eval_cumulant_rejects_nonfinite():
    with pytest.raises(DomainError):
        eval_cumulant(GAUSS, np.inf)


@pytest.mark.parametrize("fam", [GAUSS, LOGIT, POIS])
def test_rate_certification_clean_on_adoption_grid(fam):
    g = np.arange(-5.0, 5.0 + 1e-9, 0.1)
    report = validate_rate(fam, g, g, tol=1e-12)
    assert report.ok, report.violations[:3]


def test_uncorrected_poisson_rate_fails_at_unit_decrement():
    bad = with_rate(POIS, lambda h: np.asarray(h) ** 2, (1.0, 0.0))
    g = np.arange(-2.0, 2.0 + 1e-9, 0.5)
    report = validate_rate(bad, g, g, tol=1e-12)
    assert not report.ok
    hit = [v for v in report.violations if v[0] == 0.0 and v[1] == -1.0]
    assert hit, report.violations
    # remainder e^-1 against the candidate half-rate 0.5
    assert abs(hit[0][2] - (np.exp(-1.0) - 0.5)) < 1e-12


def test_log_likelihood_hand_values():
    assert log_likelihood(POIS, [[1.0]], [0.0], [0.0]) == -1.0
    assert log_likelihood(GAUSS, np.eye(2), [1.0, 1.0], [1.0, 1.0]) == 1.0
    v = log_likelihood(LOGIT, [[1.0], [1.0]], [1.0, 0.0], [0.0])
    assert abs(v - (-2 * np.log(2.0))) < 1e-15


def test_full_likelihood_matches_scipy_densities():
    rng = np.random.default_rng(0)
    X = rng.uniform(-1, 1, (40, 3))
    beta = np.array([0.5, -0.2, 0.3])
    t = X @ beta

    y = t + rng.standard_normal(40)
    ours = log_likelihood_full(GAUSS, X, y, beta)
    assert abs(ours - norm.logpdf(y, loc=t).sum()) < 1e-9

    y = (rng.random(40) < 1 / (1 + np.exp(-t))).astype(float)
    ours = log_likelihood_full(LOGIT, X, y, beta)
    assert abs(ours - bernoulli.logpmf(y.astype(int), 1 / (1 + np.exp(-t))).sum()) < 1e-9

    y = rng.poisson(np.exp(t)).astype(float)
    ours = log_likelihood_full(POIS, X, y, beta)
    assert abs(ours - poisson.logpmf(y.astype(int), np.exp(t)).sum()) < 1e-9


def test_response_validation():
    with pytest.raises(DomainError):
        log_likelihood(LOGIT, [[1.0]], [2.0], [0.0])
    with pytest.raises(DomainError):
        log_likelihood(POIS, [[1.0]], [-1.0], [0.0])
    with pytest.raises(DomainError):
        log_likelihood(GAUSS, [[1.0]], [np.nan], [0.0])


def test_mean_ok_predicates():
    assert not POIS.mean_ok(np.array([0.0]))[0]
    assert not LOGIT.mean_ok(np.array([1.0]))[0]
    assert LOGIT.mean_ok(np.array([0.5]))[0]
    assert GAUSS.mean_ok(np.array([-3.0]))[0]
