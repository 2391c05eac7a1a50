"""Dataset-level contraction quantities and their search-based estimators.

For a dataset and a ball around theta_star this module computes

- the mean gradient-difference vector at a trial parameter,
- the mean curvature value for a trial pair,
- the mean score-at-truth vector and its norm,

and estimates the two extremal ratios that drive the per-step error
recursion: the sup over the punctured inner ball of
||mean gradient difference|| / ||theta - theta_star||, and the inf over
trial pairs of the negated curvature ratio. The sup/inf have no closed
form in general, so they are approached with a deterministic
low-discrepancy lattice (quasi-uniform sphere directions crossed with
log-spaced radii) plus a local pattern-search refinement; results are
reported as lower (sup) / upper (inf) bounds together with the budget
that produced them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import ndtri

from . import models
from .errors import ValidationError

# Radii search down to 1e-3 of the inner radius: the gradient-difference
# ratio can peak in the limit toward the center (it tends to a Jacobian
# operator norm there), so small radii must be represented.
RADIUS_FLOOR_FRACTION = 1e-3

# Grid best vs refined best differing by more than this flags a warning.
REFINEMENT_DISAGREEMENT = 0.05


@dataclass(frozen=True)
class BallSpec:
    """Inner/outer search radii around the center (always theta_star)."""

    r: float
    R: float
    center: np.ndarray

    def __post_init__(self):
        center = np.asarray(self.center, dtype=np.float64)
        if center.ndim != 1:
            raise ValidationError("ball center must be a vector")
        center = center.copy()
        center.setflags(write=False)
        object.__setattr__(self, "center", center)
        if not (0 < self.r <= self.R):
            raise ValidationError(
                f"ball radii must satisfy 0 < r <= R, got r={self.r}, R={self.R}"
            )

    @property
    def p(self) -> int:
        return self.center.shape[0]


@dataclass(frozen=True)
class SearchBudget:
    """Effort knobs for the sup/inf search.

    directions: number of quasi-uniform sphere directions.
    radii: number of log-spaced radii per direction.
    refine_steps: pattern-search rounds from the best lattice point.
    """

    directions: int
    radii: int
    refine_steps: int = 8

    def __post_init__(self):
        if self.directions < 1 or self.radii < 1 or self.refine_steps < 0:
            raise ValidationError("search budget values out of range")


@dataclass(frozen=True)
class EmpiricalRates:
    """The dataset-derived convergence quantities for one ball.

    gamma_bar_n and (for the missing-data model) v_bar_n come from a
    finite search, so they are directional bounds: gamma_bar_n is a
    lower bound on the true sup, v_bar_n an upper bound on the true inf.
    e_bar_n is exact. k_bar_n = min(gamma_bar_n / v_bar_n,
    kappa_n_ceiling) when 0 < v_bar_n < inf, else the ceiling.
    floor_bound = e_bar_n / (v_bar_n - gamma_bar_n), present only when
    that denominator is positive.
    """

    gamma_bar_n: float
    v_bar_n: float
    e_bar_n: float
    k_bar_n: float
    kappa_n_ceiling: float
    floor_bound: Optional[float]
    budget: SearchBudget
    gamma_is_lower_bound: bool = True
    v_is_upper_bound: bool = False
    search_warning: Optional[str] = None


def empirical_grv(model, theta, data) -> np.ndarray:
    """Mean over the dataset of the per-sample gradient difference."""
    return models.grv_mean(model, theta, data)


def empirical_crv(model, theta_prime, theta, data) -> float:
    """Mean over the dataset of the per-sample curvature value."""
    return models.crv_mean(model, theta_prime, theta, data)


def empirical_sev(model, data) -> tuple[np.ndarray, float]:
    """Mean score-at-truth vector and its norm."""
    vec = models.sev_mean(model, data)
    return vec, float(np.linalg.norm(vec))


def _generalized_golden(dim: int) -> float:
    """Positive root of x**(dim+1) = x + 1 (the plastic-style constant
    behind the additive recurrence lattice)."""
    x = 1.5
    for _ in range(80):
        x = (1.0 + x) ** (1.0 / (dim + 1))
    return x


def sphere_directions(count: int, p: int) -> np.ndarray:
    """First `count` points of a deterministic low-discrepancy sequence
    on the unit sphere in R^p.

    Additive-recurrence (Kronecker) points in the unit cube are pushed
    through the standard normal quantile and normalized; prefixes are
    nested, so enlarging `count` only appends points. For p=1 the only
    directions are +1/-1, alternated.
    """
    if count < 1:
        raise ValidationError("direction count must be >= 1")
    if p == 1:
        signs = np.where(np.arange(count) % 2 == 0, 1.0, -1.0)
        return signs[:, None]
    phi = _generalized_golden(p)
    alpha = 1.0 / phi ** np.arange(1, p + 1)
    k = np.arange(1, count + 1, dtype=np.float64)
    u = np.mod(0.5 + np.outer(k, alpha), 1.0)
    z = ndtri(u)
    norms = np.linalg.norm(z, axis=1)
    # A zero row cannot occur for this sequence; guard anyway.
    norms[norms == 0] = 1.0
    return z / norms[:, None]


def radius_grid(count: int, r_max: float, r_min: float) -> np.ndarray:
    """First `count` log-spaced radii in [r_min, r_max], ordered so the
    endpoints come first and successive points bisect (prefixes nested)."""
    if count < 1:
        raise ValidationError("radius count must be >= 1")
    if not (0 < r_min <= r_max):
        raise ValidationError("need 0 < r_min <= r_max")
    fractions = [1.0, 0.0]
    k = 1
    while len(fractions) < count:
        # van der Corput base 2
        v, denom, kk = 0.0, 0.5, k
        while kk:
            v += denom * (kk & 1)
            kk >>= 1
            denom /= 2.0
        fractions.append(v)
        k += 1
    frac = np.array(fractions[:count])
    if r_min == r_max:
        return np.full(count, r_max)
    log_lo, log_hi = math.log(r_min), math.log(r_max)
    return np.exp(log_lo + frac * (log_hi - log_lo))


def _normalize(v: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ValidationError("cannot normalize the zero vector")
    return v / norm


class _SearchResult:
    __slots__ = ("value", "grid_value", "warning", "argmax")

    def __init__(self, value, grid_value, warning, argmax):
        self.value = value
        self.grid_value = grid_value
        self.warning = warning
        self.argmax = argmax


def _pattern_search(evaluate, direction, rho, rho_lo, rho_hi, steps, maximize):
    """Local refinement over (direction, radius) from a start point.

    Moves: radius scaled by exp(+-h), direction tilted toward +-h along
    each coordinate axis then renormalized. The step h halves whenever
    no move improves. Returns the best value seen and the evaluation log.
    """
    p = direction.shape[0]
    sign = 1.0 if maximize else -1.0
    best_val = evaluate(direction, rho)
    best = (direction, rho)
    seen = [best_val]
    h = 0.5
    for _ in range(steps):
        improved = False
        candidates = []
        d0, r0 = best
        for scale in (math.exp(h), math.exp(-h)):
            candidates.append((d0, min(rho_hi, max(rho_lo, r0 * scale))))
        if p > 1:
            for axis in range(p):
                for s in (h, -h):
                    tilt = d0.copy()
                    tilt[axis] += s
                    candidates.append((_normalize(tilt), r0))
        for cand_dir, cand_rho in candidates:
            val = evaluate(cand_dir, cand_rho)
            seen.append(val)
            if sign * val > sign * best_val:
                best_val = val
                best = (cand_dir, cand_rho)
                improved = True
        if not improved:
            h /= 2.0
    return best_val, best, seen


def _search_gamma(model, data, ball: BallSpec, budget: SearchBudget) -> _SearchResult:
    center = ball.center
    rho_lo = RADIUS_FLOOR_FRACTION * ball.r
    rho_hi = ball.r

    def evaluate(direction, rho):
        theta = center + rho * direction
        grad = models.grv_mean(model, theta, data)
        return float(np.linalg.norm(grad)) / rho

    dirs = sphere_directions(budget.directions, ball.p)
    radii = radius_grid(budget.radii, rho_hi, rho_lo)
    grid_best = -math.inf
    grid_arg = (dirs[0], radii[0])
    for u in dirs:
        for rho in radii:
            val = evaluate(u, float(rho))
            if val > grid_best:
                grid_best = val
                grid_arg = (u, float(rho))

    refined_best, refined_arg, _ = _pattern_search(
        evaluate, grid_arg[0], grid_arg[1], rho_lo, rho_hi,
        budget.refine_steps, maximize=True,
    )
    value = max(grid_best, refined_best)
    argmax = refined_arg if refined_best >= grid_best else grid_arg
    warning = None
    if grid_best > 0 and refined_best > grid_best * (1 + REFINEMENT_DISAGREEMENT):
        warning = (
            "refinement exceeded the lattice best by more than "
            f"{REFINEMENT_DISAGREEMENT:.0%}: lattice {grid_best:.6g}, "
            f"refined {refined_best:.6g}; the lattice may be too coarse"
        )
    return _SearchResult(value, grid_best, warning, argmax)


def estimate_gamma_bar_n(model, data, ball: BallSpec, budget: SearchBudget) -> float:
    """Lower-bound estimate of the sup over the punctured inner ball of
    ||mean gradient difference at theta|| / ||theta - theta_star||."""
    _check_ball(model, ball)
    return _search_gamma(model, data, ball, budget).value


def _rmc_v_search(model, data, ball: BallSpec, budget: SearchBudget) -> _SearchResult:
    # For each theta the inf over trial directions is exactly
    # lambda_min(mean conditional second-moment matrix)/(2 sigma^2):
    # arbitrarily short steps from the center along the minimizing
    # eigenvector stay inside any outer ball. Only the theta search
    # is approximate.
    center = ball.center

    def evaluate(direction, rho):
        theta = center + rho * direction
        second = models.second_moment_matrix(model, theta, data)
        return float(np.linalg.eigvalsh(second)[0]) / (2.0 * model.sigma**2)

    center_val = float(
        np.linalg.eigvalsh(models.second_moment_matrix(model, center, data))[0]
    ) / (2.0 * model.sigma**2)

    dirs = sphere_directions(budget.directions, ball.p)
    radii = radius_grid(budget.radii, ball.r, RADIUS_FLOOR_FRACTION * ball.r)
    grid_best = center_val
    grid_arg = (dirs[0], RADIUS_FLOOR_FRACTION * ball.r)
    for u in dirs:
        for rho in radii:
            val = evaluate(u, float(rho))
            if val < grid_best:
                grid_best = val
                grid_arg = (u, float(rho))

    refined_best, _, _ = _pattern_search(
        evaluate, grid_arg[0], grid_arg[1],
        RADIUS_FLOOR_FRACTION * ball.r, ball.r,
        budget.refine_steps, maximize=False,
    )
    value = min(grid_best, refined_best, center_val)
    warning = None
    if grid_best > 0 and refined_best < grid_best * (1 - REFINEMENT_DISAGREEMENT):
        warning = (
            "refinement undercut the lattice best by more than "
            f"{REFINEMENT_DISAGREEMENT:.0%}: lattice {grid_best:.6g}, "
            f"refined {refined_best:.6g}; the lattice may be too coarse"
        )
    return _SearchResult(value, grid_best, warning, None)


def estimate_v_bar_n(model, data, ball: BallSpec, budget: SearchBudget) -> float:
    """The inf over trial pairs of the negated curvature ratio.

    Mixture models: the ratio is parameter-free, 1/(2 sigma^2) exactly
    (regression mixture: smallest eigenvalue of the empirical covariate
    second moment over 2 sigma^2). Missing-data model: minimized over a
    theta lattice in the inner ball with refinement; upper bound.
    """
    _check_ball(model, ball)
    kind = models.ModelKind(model.kind)
    if kind is models.ModelKind.GMM:
        return 1.0 / (2.0 * model.sigma**2)
    if kind is models.ModelKind.MLR:
        # theta argument is ignored for MLR (the matrix is theta-free)
        second = models.second_moment_matrix(model, model.theta_star, data)
        return float(np.linalg.eigvalsh(second)[0]) / (2.0 * model.sigma**2)
    return _rmc_v_search(model, data, ball, budget).value


def compute_k_bar_n(gamma_bar_n: float, v_bar_n: float, kappa_n_ceiling: float) -> float:
    """min(gamma_bar_n / v_bar_n, ceiling) when 0 < v_bar_n < inf,
    otherwise the ceiling."""
    if 0 < v_bar_n < math.inf:
        return min(gamma_bar_n / v_bar_n, kappa_n_ceiling)
    return kappa_n_ceiling


def compute_empirical_rates(
    model, data, ball: BallSpec, budget: SearchBudget, kappa_n_ceiling: float
) -> EmpiricalRates:
    """Assemble the full set of dataset-derived convergence quantities."""
    _check_ball(model, ball)
    gamma_res = _search_gamma(model, data, ball, budget)
    gamma = gamma_res.value
    warning = gamma_res.warning

    kind = models.ModelKind(model.kind)
    v_is_upper = False
    if kind is models.ModelKind.RMC:
        v_res = _rmc_v_search(model, data, ball, budget)
        v = v_res.value
        v_is_upper = True
        if v_res.warning:
            warning = v_res.warning if warning is None else warning + "; " + v_res.warning
    else:
        v = estimate_v_bar_n(model, data, ball, budget)

    _, e_bar = empirical_sev(model, data)
    k_bar = compute_k_bar_n(gamma, v, kappa_n_ceiling)
    floor = e_bar / (v - gamma) if v > gamma else None
    return EmpiricalRates(
        gamma_bar_n=gamma,
        v_bar_n=v,
        e_bar_n=e_bar,
        k_bar_n=k_bar,
        kappa_n_ceiling=kappa_n_ceiling,
        floor_bound=floor,
        budget=budget,
        gamma_is_lower_bound=True,
        v_is_upper_bound=v_is_upper,
        search_warning=warning,
    )


@dataclass(frozen=True)
class ContractionAuditReport:
    """Outcome of checking a trajectory against the error recursion.

    Per step: errors[t+1] <= k_bar_n * errors[t] + e_bar_n / v_bar_n.
    Cumulative: errors[t] <= k_bar_n**t * errors[0] + floor_bound.
    Either check is skipped (None counts) when its premise fails
    (nonpositive v_bar_n, or no positive floor denominator).
    """

    n_transitions: int
    step_violations: Optional[int]
    step_violation_indices: tuple
    cumulative_violations: Optional[int]
    cumulative_violation_indices: tuple
    step_addend: Optional[float]
    floor_bound: Optional[float]
    tolerance: float = 1e-10


def verify_contraction_inequality(traj, rates: EmpiricalRates) -> ContractionAuditReport:
    errors = np.asarray(traj.errors, dtype=np.float64)
    tol = 1e-10
    k = rates.k_bar_n

    if rates.v_bar_n > 0:
        addend = rates.e_bar_n / rates.v_bar_n
        lhs = errors[1:]
        rhs = k * errors[:-1] + addend + tol
        step_idx = tuple(int(i) for i in np.nonzero(lhs > rhs)[0])
        step_viol = len(step_idx)
    else:
        addend = None
        step_idx = ()
        step_viol = None

    if rates.floor_bound is not None:
        t = np.arange(len(errors), dtype=np.float64)
        bound = k**t * errors[0] + rates.floor_bound + tol
        cum_idx = tuple(int(i) for i in np.nonzero(errors > bound)[0])
        cum_viol = len(cum_idx)
    else:
        cum_idx = ()
        cum_viol = None

    return ContractionAuditReport(
        n_transitions=len(errors) - 1,
        step_violations=step_viol,
        step_violation_indices=step_idx,
        cumulative_violations=cum_viol,
        cumulative_violation_indices=cum_idx,
        step_addend=addend,
        floor_bound=rates.floor_bound,
    )


def _check_ball(model, ball: BallSpec):
    if ball.p != model.p:
        raise ValidationError(
            f"ball center has dimension {ball.p}, model has {model.p}"
        )
    if not np.array_equal(ball.center, model.theta_star):
        raise ValidationError("ball must be centered at theta_star")
