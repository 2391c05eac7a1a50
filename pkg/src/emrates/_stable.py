"""Numerically guarded scalar transforms shared by the model implementations."""

from __future__ import annotations

import numpy as np

LOG2 = float(np.log(2.0))
LOG_SQRT_2PI = 0.5 * float(np.log(2.0 * np.pi))


def sigmoid(t):
    """Logistic function with the stable branch for negative arguments.

    Computes 1/(1+e^−t) for t ≥ 0 and e^t/(1+e^t) otherwise, so the
    exponential argument is never positive.
    """
    t = np.asarray(t, dtype=np.float64)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    et = np.exp(t[~pos])
    out[~pos] = et / (1.0 + et)
    if out.ndim == 0:
        return float(out)
    return out


def log_cosh(t):
    """log cosh(t) without overflow: |t| + log1p(e^{−2|t|}) − log 2."""
    t = np.abs(np.asarray(t, dtype=np.float64))
    out = t + np.log1p(np.exp(-2.0 * t)) - LOG2
    if out.ndim == 0:
        return float(out)
    return out
