"""EM iteration driver and trajectory-based rate estimation.

`run_em` repeatedly applies the model's M-step and records, per iterate,
the distance to the true parameter, the surrogate-objective gain of the
transition, and the mean observed-data log-likelihood. `estimate_rate`
fits a geometric decay constant to the pre-plateau segment of a recorded
trajectory.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import models
from .errors import SingularSystem, TooFewPoints, ValidationError


class StoppedReason(str, enum.Enum):
    MAX_ITERS = "max_iters"
    PARAM_TOL = "param_tol"


@dataclass(frozen=True)
class EMTrajectory:
    """Record of one EM run.

    Attributes
    ----------
    iterates : ndarray, shape (T+1, p)
        theta^0 .. theta^T.
    errors : ndarray, shape (T+1,)
        ||theta^t - theta_star|| per iterate.
    q_gains : ndarray, shape (T,)
        Surrogate gain Q_n(theta^{t+1}|theta^t) - Q_n(theta^t|theta^t)
        of each transition; nonnegative up to roundoff by construction
        of the M-step.
    loglik : ndarray, shape (T+1,)
        Mean observed-data log-likelihood at each iterate; nondecreasing
        up to roundoff.
    dataset_seed : int
        Seed of the dataset the run used.
    stopped_reason : StoppedReason
    """

    iterates: np.ndarray
    errors: np.ndarray
    q_gains: np.ndarray
    loglik: np.ndarray
    dataset_seed: int
    stopped_reason: StoppedReason

    def __post_init__(self):
        if len(self.errors) != len(self.iterates):
            raise ValidationError("errors and iterates must have equal length")
        if len(self.q_gains) != len(self.iterates) - 1:
            raise ValidationError("q_gains must have one entry per transition")

    @property
    def n_steps(self) -> int:
        return len(self.iterates) - 1

    def max_error(self) -> float:
        return float(np.max(self.errors))

    def exited_radius(self, radius: float) -> bool:
        """Whether any iterate left the ball of the given radius around
        theta_star. The M-step itself is unconstrained; this is the
        post-hoc diagnostic for ball-based analyses."""
        return bool(np.any(self.errors > radius))


@dataclass(frozen=True)
class RateEstimate:
    """Geometric decay fitted to the pre-plateau part of a trajectory.

    rate = exp(slope of the least-squares line through log errors over
    fit_window); floor is the plateau level the window excludes.
    """

    rate: float
    floor: float
    fit_window: tuple[int, int]
    r_squared: float

    def __post_init__(self):
        if not self.rate > 0:
            raise ValidationError("rate must be positive")
        if self.floor < 0:
            raise ValidationError("floor must be nonnegative")


def run_em(model, data, theta0, max_iters, param_tol) -> EMTrajectory:
    """Iterate theta <- m_step(theta) until the step norm falls to
    param_tol or max_iters is reached.

    Raises SingularSystem (with the iteration index attached) if an
    M-step normal system is numerically singular.
    """
    if max_iters < 1:
        raise ValidationError("max_iters must be >= 1")
    if param_tol < 0:
        raise ValidationError("param_tol must be >= 0")
    theta = np.asarray(theta0, dtype=np.float64).copy()
    if theta.shape != (model.p,):
        raise ValidationError(
            f"theta0 has shape {theta.shape}, expected ({model.p},)"
        )

    star = model.theta_star
    iterates = [theta.copy()]
    errors = [float(np.linalg.norm(theta - star))]
    loglik = [models.log_likelihood(model, theta, data)]
    q_gains: list[float] = []
    reason = StoppedReason.MAX_ITERS

    for t in range(max_iters):
        try:
            theta_next = models.m_step(model, theta, data)
        except SingularSystem as exc:
            raise SingularSystem(str(exc), iteration=t) from exc
        gain = models.q_mean(model, theta_next, theta, data) - models.q_mean(
            model, theta, theta, data
        )
        step = float(np.linalg.norm(theta_next - theta))
        theta = theta_next
        iterates.append(theta.copy())
        errors.append(float(np.linalg.norm(theta - star)))
        loglik.append(models.log_likelihood(model, theta, data))
        q_gains.append(float(gain))
        if step <= param_tol:
            reason = StoppedReason.PARAM_TOL
            break

    return EMTrajectory(
        iterates=np.array(iterates),
        errors=np.array(errors),
        q_gains=np.array(q_gains),
        loglik=np.array(loglik),
        dataset_seed=data.seed,
        stopped_reason=reason,
    )


def estimate_rate(
    traj: EMTrajectory,
    tail_fraction: float = 0.2,
    floor_multiplier: float = 3.0,
) -> RateEstimate:
    """Fit the per-iteration contraction factor of a trajectory.

    The plateau (statistical floor) is the median of the last
    `tail_fraction` of the errors; the fit window is the maximal prefix
    of iterations whose error exceeds `floor_multiplier` times that
    level, and the rate is exp of the least-squares slope of the raw
    log errors over the window.

    Raises TooFewPoints if the window has fewer than 3 points (the
    trajectory started inside the floor) or the trajectory is shorter
    than 5 iterates.
    """
    errors = np.asarray(traj.errors, dtype=np.float64)
    if len(errors) < 5:
        raise TooFewPoints(
            f"need at least 5 iterates to fit a rate, got {len(errors)}"
        )
    if not (0 < tail_fraction < 1):
        raise ValidationError("tail_fraction must be in (0, 1)")
    if floor_multiplier < 1:
        raise ValidationError("floor_multiplier must be >= 1")

    tail_len = max(1, int(math.ceil(tail_fraction * len(errors))))
    floor = float(np.median(errors[-tail_len:]))

    threshold = floor_multiplier * floor
    cut = 0
    while cut < len(errors) and errors[cut] > threshold:
        cut += 1
    if cut < 3:
        raise TooFewPoints(
            "fewer than 3 pre-plateau points: trajectory started inside "
            f"{floor_multiplier}x the estimated floor {floor:.3g}"
        )

    t = np.arange(cut, dtype=np.float64)
    log_e = np.log(errors[:cut])
    slope, intercept = np.polyfit(t, log_e, 1)
    fitted = slope * t + intercept
    ss_res = float(np.sum((log_e - fitted) ** 2))
    ss_tot = float(np.sum((log_e - log_e.mean()) ** 2))
    r_squared = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot

    return RateEstimate(
        rate=float(np.exp(slope)),
        floor=floor,
        fit_window=(0, cut - 1),
        r_squared=r_squared,
    )
