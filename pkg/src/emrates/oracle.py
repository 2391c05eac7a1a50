"""Population-level contraction parameters and concentration bounds.

Three routes to the pair (gamma, nu) whose ratio caps the convergence
rate:

- `closed_form_bounds`: the per-model analytic bounds, valid inside each
  model's stated regime (raises OutOfRegime otherwise).
- `mc_population_grv_bound`: Monte-Carlo estimates from a large
  "population proxy" dataset drawn in a seed namespace of its own,
  searched on the same lattice the empirical estimators use.
- `rmc_population_moments`: the missing-data model's exact fixed-mask
  expectations (conditional second moment and mean gradient difference),
  used to validate the Monte-Carlo route.

`epsilon_bounds` evaluates the finite-sample deviation terms; their
absolute constants are configuration knobs (bound-shape only, defaults
1), so tests built on them check scaling exponents rather than values.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import models, rates
from ._rng import STREAM_PROXY, mix64
from .errors import OutOfRegime, ValidationError

LOG_COVERING_BASE = math.log(5.0)  # unit-sphere covering count grows as 5**p


class Provenance(str, enum.Enum):
    CLOSED_FORM_BOUND = "closed_form_bound"
    MONTE_CARLO_ESTIMATE = "monte_carlo_estimate"


@dataclass(frozen=True)
class ContractionParams:
    """A (gamma, nu) pair with kappa = gamma/nu and its origin.

    kappa < 1 means the pair certifies contraction; kappa >= 1 is
    representable (callers flag it) since the formulas remain valid
    outside the contraction regime.
    """

    gamma: float
    nu: float
    provenance: Provenance
    kappa: float = None  # type: ignore[assignment]
    mc_stderr: Optional[float] = None

    def __post_init__(self):
        if self.gamma < 0:
            raise ValidationError("gamma must be nonnegative")
        if not self.nu > 0:
            raise ValidationError("nu must be positive")
        derived = self.gamma / self.nu
        if self.kappa is None:
            object.__setattr__(self, "kappa", derived)
        elif abs(self.kappa - derived) > 1e-12 * max(1.0, derived):
            raise ValidationError("kappa must equal gamma/nu")

    @property
    def is_contraction(self) -> bool:
        return self.kappa < 1.0


@dataclass(frozen=True)
class BoundConstants:
    """Unspecified absolute constants of the deviation bounds.

    These shape the bounds but carry no calibrated value; defaults are 1.
    c: exponential-decay constant in the mixture gradient bound.
    c1, c2, c3: multipliers of the three deviation terms.
    mlr_epsilon: the exponent slack in the regression-mixture first
    deviation term (rate n**-(1/2 - mlr_epsilon)).
    """

    c: float = 1.0
    c1: float = 1.0
    c2: float = 1.0
    c3: float = 1.0
    mlr_epsilon: float = 0.01

    def __post_init__(self):
        for name in ("c", "c1", "c2", "c3"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValidationError(f"constant {name} must be positive")
        if not (0 < self.mlr_epsilon < 0.5):
            raise ValidationError("mlr_epsilon must lie in (0, 0.5)")


@dataclass(frozen=True)
class EpsilonBounds:
    """Finite-sample deviation levels at confidence 1 - delta.

    eps1 scales the gradient-difference deviation, eps2 the curvature
    deviation, eps_s the score deviation. When a ContractionParams was
    supplied, gamma_n/nu_n/kappa_n carry the inflated/deflated pair
    gamma + eps1, nu - eps2 and their ratio (the rate ceiling).
    """

    eps1: float
    eps2: float
    eps_s: float
    delta: float
    constants: BoundConstants
    gamma_n: Optional[float] = None
    nu_n: Optional[float] = None
    kappa_n: Optional[float] = None

    def __post_init__(self):
        if min(self.eps1, self.eps2, self.eps_s) < 0:
            raise ValidationError("deviation bounds must be nonnegative")


def log_l_over_delta(p: int, delta: float) -> float:
    """log(L/delta) with L the p-dimensional covering bound 5**p."""
    if not (0 < delta < 1):
        raise ValidationError("delta must lie in (0, 1)")
    return p * LOG_COVERING_BASE + math.log(1.0 / delta)


def _rcr(model, ball) -> float:
    signal = float(np.linalg.norm(model.theta_star))
    if signal == 0:
        raise ValidationError("theta_star must be nonzero for relative radii")
    return ball.r / signal


def closed_form_bounds(model, ball, constants: BoundConstants | None = None) -> ContractionParams:
    """Per-model analytic (gamma, nu); raises OutOfRegime when the
    model's stated validity conditions fail.

    Mixture of Gaussians: gamma = exp(-c eta^2)/sigma^2 at inner radius
    a quarter of the signal norm, nu = 1/(2 sigma^2). Regression
    mixture: gamma = (7.3 w + 17/eta)/sigma^2 for relative radius
    w in (0, 1/4]. Missing covariates: the xi-based pair, valid for
    1/sqrt(1+w) < eta < 1/(3 (1+w) eps**(1/4)).
    """
    constants = constants or BoundConstants()
    kind = models.ModelKind(model.kind)
    eta = model.snr
    s2 = model.sigma**2

    if kind is models.ModelKind.GMM:
        gamma = math.exp(-constants.c * eta**2) / s2
        nu = 1.0 / (2.0 * s2)
        return ContractionParams(gamma, nu, Provenance.CLOSED_FORM_BOUND)

    omega = _rcr(model, ball)
    if kind is models.ModelKind.MLR:
        if omega > 0.25:
            raise OutOfRegime(
                f"relative contraction radius {omega:.4g} exceeds 1/4; the "
                "regression-mixture bound requires r <= ||theta_star||/4"
            )
        gamma = (7.3 * omega + 17.0 / eta) / s2
        nu = 1.0 / (2.0 * s2)
        return ContractionParams(gamma, nu, Provenance.CLOSED_FORM_BOUND)

    # missing covariates
    eps = model.epsilon_miss
    lower = 1.0 / math.sqrt(1.0 + omega)
    if eta <= lower:
        raise OutOfRegime(
            f"snr {eta:.4g} is below the missing-data regime floor "
            f"1/sqrt(1+omega) = {lower:.4g}"
        )
    if eps > 0:
        upper = 1.0 / (3.0 * (1.0 + omega) * eps**0.25)
        if eta >= upper:
            raise OutOfRegime(
                f"snr {eta:.4g} is above the missing-data regime ceiling "
                f"1/(3(1+omega) eps^(1/4)) = {upper:.4g}"
            )
    xi = (1.0 + omega) * eta**2
    root = math.sqrt(eps * (1.0 - eps))
    gamma = ((omega * xi**2 + (3.0 * omega + 2.0) * xi + 1.0) * eps + xi * root) / s2
    nu = (1.0 - 2.0 * omega * xi * root - (1.0 + omega) * xi * eps) / (2.0 * s2)
    if nu <= 0:
        raise OutOfRegime(
            "curvature bound is nonpositive for this configuration "
            f"(nu = {nu:.4g}); missingness too heavy for the stated regime"
        )
    return ContractionParams(gamma, nu, Provenance.CLOSED_FORM_BOUND)


def population_proxy(model, n: int, seed: int = 0):
    """A large dataset standing in for the population, drawn in a seed
    namespace disjoint from experiment datasets."""
    return models.sample_dataset(model, n, mix64(seed, STREAM_PROXY))


def mc_population_grv_bound(
    model, ball, n_mc: int, budget, seed: int = 0
) -> ContractionParams:
    """Monte-Carlo (gamma, nu) from a population proxy of n_mc draws.

    gamma is the proxy's searched sup of the mean gradient-difference
    ratio (the same lattice the empirical estimator uses, so lattice
    bias cancels in empirical-vs-population comparisons); its standard
    error comes from projecting the per-sample vectors at the argmax
    onto the mean direction. nu is the proxy's curvature bound.
    """
    if n_mc < 10**5:
        raise ValidationError("population proxy needs at least 1e5 draws")
    data = population_proxy(model, n_mc, seed)
    result = rates._search_gamma(model, data, ball, budget)
    direction, rho = result.argmax
    theta_hat = ball.center + rho * direction
    rows = models.grv_rows(model, theta_hat, data)
    mean_vec = rows.mean(axis=0)
    norm = float(np.linalg.norm(mean_vec))
    unit = mean_vec / norm if norm > 0 else np.eye(model.p)[0]
    proj = rows @ unit
    stderr = float(proj.std(ddof=1)) / math.sqrt(n_mc) / rho

    kind = models.ModelKind(model.kind)
    if kind is models.ModelKind.RMC:
        nu = rates._rmc_v_search(model, data, ball, budget).value
    else:
        nu = rates.estimate_v_bar_n(model, data, ball, budget)
    return ContractionParams(
        result.value, nu, Provenance.MONTE_CARLO_ESTIMATE, mc_stderr=stderr
    )


def rmc_population_moments(model, theta, mask):
    """Fixed-mask expectations for the missing-covariate model.

    Returns (e_sigma, e_grv): the expected conditional second-moment
    matrix and the expected gradient-difference vector, evaluated from
    the exact Gaussian-integral displays.
    """
    if models.ModelKind(model.kind) is not models.ModelKind.RMC:
        raise ValidationError("rmc_population_moments requires the RMC model")
    theta = np.asarray(theta, dtype=np.float64)
    mask = np.asarray(mask, dtype=np.float64)
    if theta.shape != (model.p,) or mask.shape != (model.p,):
        raise ValidationError("theta and mask must have length p")
    if not np.all((mask == 0) | (mask == 1)):
        raise ValidationError("mask entries must be 0 or 1")
    star = model.theta_star
    tau = 1.0 - mask
    t_tau, t_s = theta * tau, theta * mask
    s_tau, s_s = star * tau, star * mask
    d = model.sigma**2 + t_tau @ t_tau

    ds = s_s - t_s  # observed-slot difference theta_star_s - theta_s
    e_sigma = np.eye(model.p)
    e_sigma += (np.outer(t_tau, ds) + np.outer(ds, t_tau)) / d
    e_sigma += ((s_tau @ s_tau - t_tau @ t_tau + ds @ ds) / d**2) * np.outer(
        t_tau, t_tau
    )

    cross = t_tau @ s_tau
    zeta = (d - cross) * (s_tau @ s_tau - t_tau @ t_tau) - cross * (ds @ ds)
    e_grv = (t_tau - s_tau + (cross / d) * (t_s - s_s) + zeta * t_tau / d**2) / (
        model.sigma**2
    )
    return e_sigma, e_grv


def epsilon_bounds(
    model,
    delta: float,
    ball,
    n: int,
    constants: BoundConstants | None = None,
    params: ContractionParams | None = None,
) -> EpsilonBounds:
    """The three model-specific deviation levels at confidence 1 - delta.

    With `params` supplied the result also carries gamma_n = gamma +
    eps1, nu_n = nu - eps2, and their ratio kappa_n (the ceiling the
    empirical rate is compared against).
    """
    constants = constants or BoundConstants()
    if n < 1:
        raise ValidationError("n must be >= 1")
    kind = models.ModelKind(model.kind)
    eta = model.snr
    s2 = model.sigma**2
    lld = log_l_over_delta(model.p, delta)
    root = math.sqrt(lld / n)

    if kind is models.ModelKind.GMM:
        # K = sigma (1 + eta), so K^2/sigma^2 = (1+eta)^2
        eps1 = constants.c1 * (1.0 + eta) ** 2 * root
        eps2 = 0.0
        eps_s = constants.c2 * (1.0 + eta) / model.sigma * root
    elif kind is models.ModelKind.MLR:
        eps1 = constants.c1 / s2 * lld / n ** (0.5 - constants.mlr_epsilon)
        eps2 = constants.c2 / s2 * math.sqrt(math.log(1.0 / delta) / n)
        eps_s = constants.c3 / model.sigma * (1.0 + 2.0 * eta) * root
    else:
        omega = _rcr(model, ball)
        poly = eta * (1.0 + eta) * (2.0 + omega) + 1.0
        big_c = (
            constants.c1 * poly * eta * (1.0 + eta) * (1.0 + omega)
            + constants.c2 * poly * (1.0 + omega) * eta**2
            + constants.c3 * ((1.0 + omega) * eta**2 + 1.0) * (2.0 + omega) * eta**2
        )
        eps1 = big_c / s2 * root
        eps2 = constants.c1 / s2 * root
        eps_s = constants.c2 * (1.0 + eta) / model.sigma * root

    gamma_n = nu_n = kappa_n = None
    if params is not None:
        gamma_n = params.gamma + eps1
        nu_n = params.nu - eps2
        kappa_n = gamma_n / nu_n if nu_n > 0 else math.inf
    return EpsilonBounds(
        eps1=eps1,
        eps2=eps2,
        eps_s=eps_s,
        delta=delta,
        constants=constants,
        gamma_n=gamma_n,
        nu_n=nu_n,
        kappa_n=kappa_n,
    )


@dataclass(frozen=True)
class SampleSizeReport:
    """Margins of the finite-sample validity conditions.

    main: r(nu - gamma) - (eps_s + r eps1 + r eps2) must be positive.
    eps2_headroom: nu/2 - eps2 must be positive.
    nu_n: nu - eps2 must be positive.
    unsatisfiable: nu <= gamma, so no n can pass the main condition.
    """

    main_margin: float
    main_ok: bool
    eps2_margin: float
    eps2_ok: bool
    nu_n: float
    nu_n_ok: bool
    unsatisfiable: bool

    @property
    def all_ok(self) -> bool:
        return self.main_ok and self.eps2_ok and self.nu_n_ok


def check_sample_size_conditions(model, params, bounds, ball) -> SampleSizeReport:
    r = ball.r
    gap = params.nu - params.gamma
    main_margin = r * gap - (bounds.eps_s + r * bounds.eps1 + r * bounds.eps2)
    eps2_margin = params.nu / 2.0 - bounds.eps2
    nu_n = params.nu - bounds.eps2
    return SampleSizeReport(
        main_margin=main_margin,
        main_ok=main_margin > 0,
        eps2_margin=eps2_margin,
        eps2_ok=eps2_margin > 0,
        nu_n=nu_n,
        nu_n_ok=nu_n > 0,
        unsatisfiable=gap <= 0,
    )
