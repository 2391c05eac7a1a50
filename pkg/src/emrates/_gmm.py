"""Symmetric two-component Gaussian mixture: per-sample and batch math.

Observation y = z·θ* + w, z = ±1 equiprobable, w ~ N(0, σ²I_p). The
membership weight is w_θ(y) = ς(2⟨θ, y⟩/σ²) and 2w_θ(y) − 1 =
tanh(⟨θ, y⟩/σ²), which gives the closed-form maximizer of the surrogate.
"""

from __future__ import annotations

import numpy as np

from ._rng import normal_columns
from ._stable import LOG2, LOG_SQRT_2PI, log_cosh, sigmoid


def generate(model, u):
    p = model.p
    z = np.where(u[:, 0] < 0.5, 1.0, -1.0)
    w = normal_columns(u[:, 1:], p)
    y = z[:, None] * model.theta_star[None, :] + model.sigma * w
    return y, None, None


def _weight(model, theta, y):
    # ς(2⟨θ,y⟩/σ²); y may be (p,) or (n,p)
    return sigmoid(2.0 * (y @ theta) / model.sigma**2)


def q_value(model, theta_prime, theta, sample):
    y = np.asarray(sample.y, dtype=np.float64)
    s2 = model.sigma**2
    w = _weight(model, theta, y)
    d_minus = y - theta_prime
    d_plus = y + theta_prime
    quad = w * (d_minus @ d_minus) + (1.0 - w) * (d_plus @ d_plus)
    const = LOG2 + model.p * (LOG_SQRT_2PI + np.log(model.sigma))
    return -quad / (2.0 * s2) - const


def q_gradient(model, theta_prime, theta, sample):
    y = np.asarray(sample.y, dtype=np.float64)
    s2 = model.sigma**2
    w = _weight(model, theta, y)
    return ((2.0 * w - 1.0) * y - theta_prime) / s2


def m_step(model, theta, data):
    s2 = model.sigma**2
    t = np.tanh((data.y @ theta) / s2)
    return (t[:, None] * data.y).mean(axis=0)


def q_mean(model, theta_prime, theta, data):
    y = data.y
    s2 = model.sigma**2
    w = _weight(model, theta, y)
    d_minus = y - theta_prime[None, :]
    d_plus = y + theta_prime[None, :]
    quad = w * np.einsum("np,np->n", d_minus, d_minus) + (1.0 - w) * np.einsum(
        "np,np->n", d_plus, d_plus
    )
    const = LOG2 + model.p * (LOG_SQRT_2PI + np.log(model.sigma))
    return -quad.mean() / (2.0 * s2) - const


def _loglik_terms(model, theta, y):
    # log[½φ(y−θ) + ½φ(y+θ)] = logcosh(⟨θ,y⟩/σ²) − (‖y‖²+‖θ‖²)/(2σ²) − p·log(√(2π)σ)
    s2 = model.sigma**2
    yy = np.einsum("...p,...p->...", y, y)
    return (
        log_cosh((y @ theta) / s2)
        - (yy + theta @ theta) / (2.0 * s2)
        - model.p * (LOG_SQRT_2PI + np.log(model.sigma))
    )


def loglik_mean(model, theta, data):
    return _loglik_terms(model, theta, data.y).mean()


def per_sample(model, theta_prime, theta, sample):
    y = np.asarray(sample.y, dtype=np.float64)
    star = model.theta_star
    s2 = model.sigma**2
    grv = (2.0 / s2) * (_weight(model, theta, y) - _weight(model, star, y)) * y
    diff = theta_prime - star
    crv = -(diff @ diff) / (2.0 * s2)
    sev = (np.tanh((y @ star) / s2) * y - star) / s2
    return grv, crv, sev


def grv_rows(model, theta, data):
    y = data.y
    s2 = model.sigma**2
    dw = _weight(model, theta, y) - _weight(model, model.theta_star, y)
    return (2.0 / s2) * (dw[:, None] * y)


def grv_mean(model, theta, data):
    return grv_rows(model, theta, data).mean(axis=0)


def crv_mean(model, theta_prime, theta, data):
    diff = theta_prime - model.theta_star
    return -(diff @ diff) / (2.0 * model.sigma**2)


def sev_mean(model, data):
    star = model.theta_star
    s2 = model.sigma**2
    t = np.tanh((data.y @ star) / s2)
    return ((t[:, None] * data.y).mean(axis=0) - star) / s2
