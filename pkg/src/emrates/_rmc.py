"""Linear regression with covariates missing completely at random.

Observation (y, x_obs, mask): x ~ N(0, I_p), y = ⟨θ*, x⟩ + w with
w ~ N(0, σ²); each coordinate of x is dropped independently with
probability ε, mask_j = 1 means observed, and x_obs carries zeros at
missing slots. The probability of an observed mask s is
ε^(#missing)·(1−ε)^(#observed).

Writing τ = 1 − mask and θ_τ/θ_s for θ zeroed outside the missing/observed
slots, the latent covariate block given the observation is Gaussian with

    mean      b_θ = (y − ⟨θ, x_obs⟩)/(σ² + ‖θ_τ‖²) · θ_τ
    covariance A_θ = diag(τ) − θ_τθ_τᵀ/(σ² + ‖θ_τ‖²)

so the imputed covariate has conditional mean μ_θ = x_obs + b_θ and
conditional second moment Σ_θ = μ_θμ_θᵀ + A_θ. The surrogate objective is
a quadratic in θ′ built from (μ_θ, Σ_θ); its maximizer solves
[Σ_k Σ_θ(sample_k)]θ′ = Σ_k y_k μ_θ(sample_k).
"""

from __future__ import annotations

import numpy as np

from ._linalg import solve_spd
from ._rng import normal_columns
from ._stable import LOG_SQRT_2PI

_TINY_LOG = -np.inf


def generate(model, u):
    p = model.p
    pairs = 2 * ((p + 1) // 2)
    x = normal_columns(u[:, :pairs], p)
    w = normal_columns(u[:, pairs : pairs + 2], 1)[:, 0]
    y = x @ model.theta_star + model.sigma * w
    mask = (u[:, pairs + 2 :] >= model.epsilon_miss).astype(np.float64)
    x_obs = x * mask
    return y, x_obs, mask


def _log_mask_probability(model, mask):
    """log of ε^(#missing)·(1−ε)^(#observed) for one 0/1 mask vector."""
    eps = model.epsilon_miss
    n_miss = float(np.sum(mask == 0))
    n_obs = float(mask.size - n_miss)
    if n_miss == 0:
        return n_obs * np.log1p(-eps)
    if eps == 0.0:
        return _TINY_LOG
    return n_miss * np.log(eps) + n_obs * np.log1p(-eps)


def conditional_moments(model, theta, sample):
    mask = np.asarray(sample.mask, dtype=np.float64)
    x_obs = np.asarray(sample.x, dtype=np.float64)
    y = float(sample.y)
    tau = 1.0 - mask
    theta_tau = theta * tau
    d = model.sigma**2 + theta_tau @ theta_tau
    b = ((y - x_obs @ theta) / d) * theta_tau
    mu = x_obs + b
    a_matrix = np.diag(tau) - np.outer(theta_tau, theta_tau) / d
    sigma_matrix = np.outer(mu, mu) + a_matrix
    return mu, a_matrix, sigma_matrix


def _per_sample_pieces(model, theta, mask, x_obs, y):
    """(μ, θ_τ, d, τ) without materializing matrices."""
    tau = 1.0 - mask
    theta_tau = theta * tau
    d = model.sigma**2 + theta_tau @ theta_tau
    mu = x_obs + ((y - x_obs @ theta) / d) * theta_tau
    return mu, theta_tau, d, tau


def _sigma_matvec(mu, theta_tau, d, tau, v):
    """Σ_θ v = μ(μᵀv) + τ⊙v − θ_τ(θ_τᵀv)/d."""
    return mu * (mu @ v) + tau * v - theta_tau * ((theta_tau @ v) / d)


def q_value(model, theta_prime, theta, sample):
    mask = np.asarray(sample.mask, dtype=np.float64)
    x_obs = np.asarray(sample.x, dtype=np.float64)
    y = float(sample.y)
    s2 = model.sigma**2
    mu, theta_tau, d, tau = _per_sample_pieces(model, theta, mask, x_obs, y)
    quad_form = (mu @ theta_prime) ** 2 + tau @ theta_prime**2 - (
        theta_tau @ theta_prime
    ) ** 2 / d
    trace_sigma = mu @ mu + float(tau.sum()) - (theta_tau @ theta_tau) / d
    return (
        -(y**2 - 2.0 * y * (theta_prime @ mu) + quad_form) / (2.0 * s2)
        - trace_sigma / 2.0
        - (model.p + 1) * LOG_SQRT_2PI
        - np.log(model.sigma)
        + _log_mask_probability(model, mask)
    )


def q_gradient(model, theta_prime, theta, sample):
    mask = np.asarray(sample.mask, dtype=np.float64)
    x_obs = np.asarray(sample.x, dtype=np.float64)
    y = float(sample.y)
    mu, theta_tau, d, tau = _per_sample_pieces(model, theta, mask, x_obs, y)
    sigma_tp = _sigma_matvec(mu, theta_tau, d, tau, theta_prime)
    return (y * mu - sigma_tp) / model.sigma**2


def _batch_pieces(model, theta, data):
    mask, x_obs, y = data.mask, data.x, data.y
    tau = 1.0 - mask
    t_rows = theta[None, :] * tau  # per-sample θ_τ
    d = model.sigma**2 + np.einsum("np,np->n", t_rows, t_rows)
    coef = (y - x_obs @ theta) / d
    mu = x_obs + coef[:, None] * t_rows
    return mu, t_rows, d, tau


def _batch_sigma_mean(model, theta, data):
    mu, t_rows, d, tau = _batch_pieces(model, theta, data)
    n = data.n
    second = (mu.T @ mu) / n
    second += np.diag(tau.mean(axis=0))
    scaled = t_rows / np.sqrt(d)[:, None]
    second -= (scaled.T @ scaled) / n
    return second, mu


def m_step(model, theta, data):
    second, mu = _batch_sigma_mean(model, theta, data)
    rhs = (data.y[:, None] * mu).mean(axis=0)
    return solve_spd(second, rhs, context="RMC m_step")


def second_moment_matrix(model, theta, data):
    second, _ = _batch_sigma_mean(model, theta, data)
    return second


def q_mean(model, theta_prime, theta, data):
    mu, t_rows, d, tau = _batch_pieces(model, theta, data)
    s2 = model.sigma**2
    y = data.y
    quad_form = (
        (mu @ theta_prime) ** 2
        + tau @ theta_prime**2
        - (t_rows @ theta_prime) ** 2 / d
    )
    trace_sigma = (
        np.einsum("np,np->n", mu, mu)
        + tau.sum(axis=1)
        - np.einsum("np,np->n", t_rows, t_rows) / d
    )
    eps = model.epsilon_miss
    n_miss = (1.0 - data.mask).sum(axis=1)
    n_obs = data.mask.sum(axis=1)
    if eps == 0.0:
        log_psi = np.where(n_miss == 0, 0.0, _TINY_LOG)
    else:
        log_psi = n_miss * np.log(eps) + n_obs * np.log1p(-eps)
    values = (
        -(y**2 - 2.0 * y * (mu @ theta_prime) + quad_form) / (2.0 * s2)
        - trace_sigma / 2.0
        - (model.p + 1) * LOG_SQRT_2PI
        - np.log(model.sigma)
        + log_psi
    )
    return values.mean()


def loglik_mean(model, theta, data):
    # Observed-data density: the regression residual y − ⟨θ, x_obs⟩ is
    # N(0, σ² + ‖θ_τ‖²); observed covariate coordinates are standard
    # normal; the mask itself carries its pattern probability.
    mask, x_obs, y = data.mask, data.x, data.y
    tau = 1.0 - mask
    t_rows = theta[None, :] * tau
    v = model.sigma**2 + np.einsum("np,np->n", t_rows, t_rows)
    resid = y - x_obs @ theta
    n_obs = mask.sum(axis=1)
    n_miss = model.p - n_obs
    eps = model.epsilon_miss
    if eps == 0.0:
        log_psi = np.where(n_miss == 0, 0.0, _TINY_LOG)
    else:
        log_psi = n_miss * np.log(eps) + n_obs * np.log1p(-eps)
    xx_obs = np.einsum("np,np->n", x_obs, x_obs)
    terms = (
        -0.5 * np.log(v)
        - LOG_SQRT_2PI
        - resid**2 / (2.0 * v)
        - xx_obs / 2.0
        - n_obs * LOG_SQRT_2PI
        + log_psi
    )
    return terms.mean()


def per_sample(model, theta_prime, theta, sample):
    mask = np.asarray(sample.mask, dtype=np.float64)
    x_obs = np.asarray(sample.x, dtype=np.float64)
    y = float(sample.y)
    star = model.theta_star
    s2 = model.sigma**2
    mu, theta_tau, d, tau = _per_sample_pieces(model, theta, mask, x_obs, y)
    mu_s, star_tau, d_s, _ = _per_sample_pieces(model, star, mask, x_obs, y)
    sigma_star_t = _sigma_matvec(mu, theta_tau, d, tau, star)
    sigma_star_s = _sigma_matvec(mu_s, star_tau, d_s, tau, star)
    grv = (y * (mu - mu_s) - (sigma_star_t - sigma_star_s)) / s2
    diff = theta_prime - star
    crv = -(
        (mu @ diff) ** 2 + tau @ diff**2 - (theta_tau @ diff) ** 2 / d
    ) / (2.0 * s2)
    sev = (y * mu_s - sigma_star_s) / s2
    return grv, crv, sev


def grv_rows(model, theta, data):
    star = model.theta_star
    s2 = model.sigma**2
    mu, t_rows, d, tau = _batch_pieces(model, theta, data)
    mu_s, s_rows, d_s, _ = _batch_pieces(model, star, data)
    y = data.y
    # (Σ_θ − Σ_θ*)θ*: the τ⊙θ* terms cancel in the difference.
    mv_t = mu * (mu @ star)[:, None] - t_rows * ((t_rows @ star) / d)[:, None]
    mv_s = mu_s * (mu_s @ star)[:, None] - s_rows * ((s_rows @ star) / d_s)[:, None]
    return (y[:, None] * (mu - mu_s) - (mv_t - mv_s)) / s2


def grv_mean(model, theta, data):
    return grv_rows(model, theta, data).mean(axis=0)


def crv_mean(model, theta_prime, theta, data):
    diff = theta_prime - model.theta_star
    second, _ = _batch_sigma_mean(model, theta, data)
    return -(diff @ second @ diff) / (2.0 * model.sigma**2)


def sev_mean(model, data):
    star = model.theta_star
    s2 = model.sigma**2
    mu_s, s_rows, d_s, tau = _batch_pieces(model, star, data)
    mv = (
        mu_s * (mu_s @ star)[:, None]
        + tau * star[None, :]
        - s_rows * ((s_rows @ star) / d_s)[:, None]
    )
    per = data.y[:, None] * mu_s - mv
    return per.mean(axis=0) / s2
