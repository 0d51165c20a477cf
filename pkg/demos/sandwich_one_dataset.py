# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#     text_representation:
#       extension: .py
#       format_name: percent
#       format_version: '1.3'
# ---

# %% [markdown]
# # Bracketing the log-evidence of one dataset
#
# This walkthrough builds every ingredient of the two-sided log-evidence
# bound on a single conjugate Gaussian dataset, where the exact answer is
# available in closed form, and shows the exact value landing inside the
# bracket.
#
# The pipeline has five independent certificates:
#
# 1. a **population-level fit** `beta*` (the KL-optimal parameter for the
#    true data-generating mean, which need not be in the model class),
# 2. a **localization ellipsoid** around `beta*` with radius
#    `c1 * sqrt(d/n)` in Euclidean coordinates,
# 3. a **curvature certificate** `(H, c)` sandwiching the expected
#    log-likelihood drop by the quadratic forms `q/2` and `q/(2c)` on that
#    ellipsoid,
# 4. a **stochastic-term constant** `C` bounding the centered empirical
#    process over the ellipsoid (calibrated here by simulation from the
#    true mechanism),
# 5. **prior density extremes** over the ellipsoid.
#
# The bound assembler combines them with the Gaussian mass of the
# ellipsoid under the curvature metric.

# %%
import numpy as np

from evbounds import (
    certificate,
    compute_bounds,
    conjugate_log_z,
    default_ellipsoid,
    extremes_over_ball,
    get_family,
    get_mechanism,
    get_prior,
    log_likelihood_full,
    make_design,
    calibrate_C,
    solve_mle,
    solve_pseudo_true,
)

rng_seed = 20260816
n, d = 100, 5
family = get_family("gaussian")
beta0 = np.array([0.4, -0.3, 0.2, 0.1, -0.2])

X = make_design(n, d, "uniform", seed=1)
mech = get_mechanism("glm-well-specified", family="gaussian", beta0=beta0)
y = mech.draw(X, np.random.default_rng(rng_seed))
print(f"design {X.shape}, response mean {y.mean():.3f}")

# %% [markdown]
# ## 1. Population fit and localization set
#
# With a well-specified Gaussian truth the population fit recovers the
# true coefficients exactly (it solves the population normal equations).

# %%
fit = solve_pseudo_true(family, X, mech.mean(X))
print("beta*      ", np.round(fit.beta_star, 6))
print("gradient   ", fit.grad_norm)

ell = default_ellipsoid(fit.beta_star, n, c1=4.0)
print("euclidean radius of the localization set:",
      float(np.sqrt(ell.threshold / n)))

# %% [markdown]
# ## 2. Curvature certificate
#
# For the Gaussian family the log-likelihood is exactly quadratic, so the
# curvature ratio `c` is exactly 1 and the sandwich is an equality.

# %%
cert = certificate(family, X, ell)
print("c =", cert.c, " (1 means the quadratic approximation is exact)")
print("log|H| =", float(np.linalg.slogdet(cert.H)[1]))

# %% [markdown]
# ## 3. Stochastic-term constant
#
# `calibrate_C` simulates fresh responses from the mechanism and takes an
# empirical quantile of the supremum of the centered score process over
# the ellipsoid — for a linear process that supremum has a closed form,
# so each replicate is one matrix-vector product.

# %%
proc = calibrate_C(mech, X, ell, n_rep=400, delta_tilde=0.05, seed=2)
print(f"C = {proc.C:.4f} at exceedance level {proc.delta_tilde}")

# %% [markdown]
# ## 4. Prior extremes and assembly

# %%
prior = get_prior("gaussian-product", tau_p=5.0)
prior_ext = extremes_over_ball(prior, ell)
print("log prior density over the set: sup %.4f  inf %.4f" % prior_ext)

ell_star = log_likelihood_full(family, X, y, fit.beta_star)
mle = solve_mle(family, X, y)
report = compute_bounds(
    fit, ell_star, cert, proc, prior_ext, ell,
    eta=0.05, delta=0.05, assumption1_checked=True,
    mle_log_lik=log_likelihood_full(family, X, y, mle.beta_star))

# %% [markdown]
# ## 5. The verdict
#
# The closed-form evidence integrates the Gaussian likelihood against the
# Gaussian prior analytically — an oracle the bound never sees.

# %%
oracle = conjugate_log_z(X, y, sigma=1.0, tau_p=5.0)
print(f"lower bound  {report.lower:10.3f}")
print(f"exact        {oracle.log_z:10.3f}")
print(f"upper bound  {report.upper:10.3f}")
print(f"hit: {report.lower <= oracle.log_z <= report.upper}, "
      f"width {report.width:.2f}, certified {report.theorem_certified}, "
      f"guarantee {report.coverage_guarantee:.2f}")

# %% [markdown]
# Per-term decomposition (everything added to the Laplace-style skeleton
# `l(beta*) - log|H|/2`):

# %%
for side, terms in (("upper", report.terms_upper), ("lower", report.terms_lower)):
    print(side)
    for name, value in terms.items():
        print(f"   {name:24s} {value:+9.4f}")

# %% [markdown]
# The gap between the sample optimum and the population anchor is reported
# as metadata — the interval itself stays anchored at `beta*`:

# %%
print(f"sample-MLE log-likelihood gap: {report.mle_gap:.4f}")
