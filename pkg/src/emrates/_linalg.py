"""Shared SPD solve used by the MLR/RMC normal equations."""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import SingularSystem

# λmax/λmin beyond this counts as singular for the M-step policy.
CONDITION_LIMIT = 1e12


def _usable(a: np.ndarray) -> bool:
    try:
        eigs = np.linalg.eigvalsh(a)
    except np.linalg.LinAlgError:
        return False
    lo, hi = float(eigs[0]), float(eigs[-1])
    return np.isfinite(hi) and lo > 0.0 and hi <= CONDITION_LIMIT * lo


def solve_spd(a: np.ndarray, b: np.ndarray, context: str = "") -> np.ndarray:
    """Solve ax = b for symmetric positive-definite a.

    On an ill-conditioned or non-PD matrix, adds diagonal jitter
    1e−10·trace(a)/p once and retries; if the system is still unusable,
    raises SingularSystem.
    """
    a = np.asarray(a, dtype=np.float64)
    if not _usable(a):
        jitter = 1e-10 * float(np.trace(a)) / a.shape[0]
        a = a + jitter * np.eye(a.shape[0])
        if not _usable(a):
            raise SingularSystem(
                f"normal-equation matrix singular beyond condition "
                f"{CONDITION_LIMIT:g} after jitter retry"
                + (f" ({context})" if context else "")
            )
    return cho_solve(cho_factor(a, lower=True), b)
