"""Mixture of two symmetric linear regressions: per-sample and batch math.

Observation (y, x): x ~ N(0, I_p), y = z·⟨x, θ*⟩ + w with z = ±1
equiprobable and w ~ N(0, σ²). Membership weight
w_θ(y, x) = ς(2y⟨x, θ⟩/σ²); the surrogate maximizer solves the normal
equations [Σ x_kx_kᵀ]θ′ = Σ tanh(y_k⟨x_k, θ⟩/σ²)·y_k·x_k.
"""

from __future__ import annotations

import numpy as np

from ._linalg import solve_spd
from ._rng import normal_columns
from ._stable import LOG2, LOG_SQRT_2PI, log_cosh, sigmoid


def generate(model, u):
    p = model.p
    pairs = 2 * ((p + 1) // 2)
    x = normal_columns(u[:, :pairs], p)
    w = normal_columns(u[:, pairs : pairs + 2], 1)[:, 0]
    z = np.where(u[:, pairs + 2] < 0.5, 1.0, -1.0)
    y = z * (x @ model.theta_star) + model.sigma * w
    return y, x, None


def _weight(model, theta, y, x):
    return sigmoid(2.0 * y * (x @ theta) / model.sigma**2)


def q_value(model, theta_prime, theta, sample):
    x = np.asarray(sample.x, dtype=np.float64)
    y = float(sample.y)
    s2 = model.sigma**2
    w = _weight(model, theta, y, x)
    proj = x @ theta_prime
    quad = w * (y - proj) ** 2 + (1.0 - w) * (y + proj) ** 2
    const = LOG2 + (model.p + 1) * LOG_SQRT_2PI + np.log(model.sigma)
    return -quad / (2.0 * s2) - (x @ x) / 2.0 - const


def q_gradient(model, theta_prime, theta, sample):
    x = np.asarray(sample.x, dtype=np.float64)
    y = float(sample.y)
    s2 = model.sigma**2
    w = _weight(model, theta, y, x)
    return ((2.0 * w - 1.0) * y - x @ theta_prime) * x / s2


def m_step(model, theta, data):
    x, y = data.x, data.y
    s2 = model.sigma**2
    a = (x.T @ x) / data.n
    t = np.tanh(y * (x @ theta) / s2)
    b = ((t * y)[:, None] * x).mean(axis=0)
    return solve_spd(a, b, context="MLR m_step")


def q_mean(model, theta_prime, theta, data):
    x, y = data.x, data.y
    s2 = model.sigma**2
    w = _weight(model, theta, y, x)
    proj = x @ theta_prime
    quad = w * (y - proj) ** 2 + (1.0 - w) * (y + proj) ** 2
    const = LOG2 + (model.p + 1) * LOG_SQRT_2PI + np.log(model.sigma)
    xx = np.einsum("np,np->n", x, x)
    return (-quad / (2.0 * s2) - xx / 2.0).mean() - const


def _loglik_terms(model, theta, y, x):
    # log[½φ(y−⟨x,θ⟩;σ²) + ½φ(y+⟨x,θ⟩;σ²)] + log φ_p(x; I)
    s2 = model.sigma**2
    proj = x @ theta
    xx = np.einsum("...p,...p->...", x, x)
    return (
        log_cosh(y * proj / s2)
        - (y**2 + proj**2) / (2.0 * s2)
        - (LOG_SQRT_2PI + np.log(model.sigma))
        - xx / 2.0
        - model.p * LOG_SQRT_2PI
    )


def loglik_mean(model, theta, data):
    return _loglik_terms(model, theta, data.y, data.x).mean()


def per_sample(model, theta_prime, theta, sample):
    x = np.asarray(sample.x, dtype=np.float64)
    y = float(sample.y)
    star = model.theta_star
    s2 = model.sigma**2
    grv = (2.0 / s2) * (_weight(model, theta, y, x) - _weight(model, star, y, x)) * y * x
    diff_proj = x @ (theta_prime - star)
    crv = -(diff_proj**2) / (2.0 * s2)
    sev = (np.tanh(y * (x @ star) / s2) * y - x @ star) * x / s2
    return grv, crv, sev


def grv_rows(model, theta, data):
    x, y = data.x, data.y
    s2 = model.sigma**2
    dw = _weight(model, theta, y, x) - _weight(model, model.theta_star, y, x)
    return (2.0 / s2) * ((dw * y)[:, None] * x)


def grv_mean(model, theta, data):
    return grv_rows(model, theta, data).mean(axis=0)


def crv_mean(model, theta_prime, theta, data):
    proj = data.x @ (theta_prime - model.theta_star)
    return -np.mean(proj**2) / (2.0 * model.sigma**2)


def sev_mean(model, data):
    x, y = data.x, data.y
    star = model.theta_star
    s2 = model.sigma**2
    proj = x @ star
    resid = np.tanh(y * proj / s2) * y - proj
    return (resid[:, None] * x).mean(axis=0) / s2


def second_moment_matrix(model, theta, data):
    return (data.x.T @ data.x) / data.n
