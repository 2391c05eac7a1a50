"""Model definitions and per-sample/batch operations for the three models.

The package implements three canonical latent-variable models:

* ``GMM`` — balanced two-component symmetric Gaussian mixture:
  y = z·θ* + w with z = ±1 equiprobable and w ~ N(0, σ²I_p).
* ``MLR`` — mixture of two symmetric linear regressions:
  x ~ N(0, I_p), y = z·⟨x, θ*⟩ + w with z = ±1 and w ~ N(0, σ²).
* ``RMC`` — linear regression with covariates missing completely at
  random: y = ⟨θ*, x⟩ + w, each coordinate of x dropped independently
  with probability ε; only (y, x restricted to the observed slots, mask)
  is kept.

For each model this module exposes the surrogate objective ``q_value``
(the conditional expectation of the complete-data log-density given the
observation, evaluated at a candidate θ′ under conditioning parameter θ),
its θ′-gradient, the exact maximizer ``m_step``, the observed-data
log-likelihood, and the three per-sample diagnostic quantities used by the
adaptive rate estimators:

* ``grv`` — gradient-difference vector ∇₁q(θ*|θ) − ∇₁q(θ*|θ*),
* ``crv`` — curvature value q(θ′|θ) − q(θ*|θ) − ⟨∇₁q(θ*|θ), θ′−θ*⟩
  (a negative quadratic form in θ′−θ* for all three models),
* ``sev`` — score at the truth ∇₁q(θ*|θ*), whose population mean is zero.

Scalar (one-sample) functions are the reference implementations; the
``*_mean`` batch functions are vectorized equivalents used by the
estimators and are tested against per-sample loops.

Sampling layout
---------------
Datasets are reproducible bit-for-bit from ``(seed, n)``: all variates
come from one ``(n, m)`` uniform block (see `_rng`), with the per-sample
word budget ``m`` and column layout fixed per model kind:

* GMM: col 0 → sign z (z = +1 iff u < 1/2); cols 1..2⌈p/2⌉ → Box-Muller
  normals for the noise vector.
* MLR: cols 0..2⌈p/2⌉−1 → covariate normals; next 2 → one noise normal;
  last → sign z.
* RMC: cols 0..2⌈p/2⌉−1 → covariate normals; next 2 → one noise normal;
  last p → mask uniforms (coordinate observed iff u ≥ ε).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from . import _gmm, _mlr, _rmc
from ._rng import STREAM_DATASET, uniform_block
from .errors import ValidationError


class ModelKind(str, Enum):
    GMM = "GMM"
    MLR = "MLR"
    RMC = "RMC"


@dataclass(frozen=True)
class ModelSpec:
    """Immutable definition of one data-generating model.

    Parameters
    ----------
    kind : ModelKind
    theta_star : array of shape (p,)
        True parameter.
    sigma : float
        Noise standard deviation, σ > 0.
    epsilon_miss : float
        Per-coordinate missingness probability in [0, 1); must be 0 for
        GMM/MLR.
    """

    kind: ModelKind
    theta_star: np.ndarray
    sigma: float
    epsilon_miss: float = 0.0

    def __post_init__(self):
        kind = ModelKind(self.kind)
        object.__setattr__(self, "kind", kind)
        theta = np.asarray(self.theta_star, dtype=np.float64).reshape(-1).copy()
        if theta.size < 1:
            raise ValidationError("theta_star must have length p >= 1")
        if not np.all(np.isfinite(theta)):
            raise ValidationError("theta_star must be finite")
        theta.setflags(write=False)
        object.__setattr__(self, "theta_star", theta)
        sigma = float(self.sigma)
        if not (sigma > 0 and np.isfinite(sigma)):
            raise ValidationError("sigma must be positive and finite")
        object.__setattr__(self, "sigma", sigma)
        eps = float(self.epsilon_miss)
        if not (0.0 <= eps < 1.0):
            raise ValidationError("epsilon_miss must lie in [0, 1)")
        if eps != 0.0 and kind is not ModelKind.RMC:
            raise ValidationError("epsilon_miss must be 0 unless kind is RMC")
        object.__setattr__(self, "epsilon_miss", eps)

    @property
    def p(self) -> int:
        return int(self.theta_star.size)

    @property
    def snr(self) -> float:
        """Signal-to-noise ratio ‖θ*‖/σ."""
        return float(np.linalg.norm(self.theta_star) / self.sigma)


@dataclass(frozen=True)
class Sample:
    """One observation. Field usage depends on the model kind.

    GMM: ``y`` is the (p,) observation, ``x``/``mask`` are None.
    MLR: ``y`` is scalar, ``x`` the (p,) covariate.
    RMC: ``y`` is scalar, ``x`` the (p,) covariate with missing slots
    zeroed, ``mask`` the 0/1 vector with 1 = observed.
    """

    y: np.ndarray | float
    x: np.ndarray | None = None
    mask: np.ndarray | None = None


class _SampleSeq(Sequence):
    """Lazy view of a Dataset as a sequence of Sample objects."""

    def __init__(self, dataset: "Dataset"):
        self._d = dataset

    def __len__(self) -> int:
        return self._d.n

    def __getitem__(self, k):
        if isinstance(k, slice):
            return [self[i] for i in range(*k.indices(len(self)))]
        return self._d.sample(k)


@dataclass(frozen=True)
class Dataset:
    """n i.i.d. samples plus the seed that produced them.

    The raw columnar arrays are read-only; ``samples``/``sample(k)``
    provide the per-sample view.
    """

    model: ModelSpec
    n: int
    seed: int
    y: np.ndarray = field(repr=False)
    x: np.ndarray | None = field(repr=False, default=None)
    mask: np.ndarray | None = field(repr=False, default=None)

    def __post_init__(self):
        for arr in (self.y, self.x, self.mask):
            if arr is not None:
                arr.setflags(write=False)

    def sample(self, k: int) -> Sample:
        k = int(k)
        if not (0 <= k < self.n):
            raise IndexError(f"sample index {k} out of range [0, {self.n})")
        kind = self.model.kind
        if kind is ModelKind.GMM:
            return Sample(y=self.y[k])
        if kind is ModelKind.MLR:
            return Sample(y=float(self.y[k]), x=self.x[k])
        return Sample(y=float(self.y[k]), x=self.x[k], mask=self.mask[k])

    @property
    def samples(self) -> Sequence:
        return _SampleSeq(self)


@dataclass(frozen=True)
class PerSampleQuantities:
    """Per-sample diagnostic triple (grv, crv, sev); see module docstring."""

    grv: np.ndarray
    crv: float
    sev: np.ndarray


_IMPL = {ModelKind.GMM: _gmm, ModelKind.MLR: _mlr, ModelKind.RMC: _rmc}


def _impl(model: ModelSpec):
    return _IMPL[model.kind]


def uniforms_per_sample(model: ModelSpec) -> int:
    """Fixed per-sample uniform word budget for the model kind."""
    p = model.p
    pairs = 2 * ((p + 1) // 2)
    if model.kind is ModelKind.GMM:
        return 1 + pairs
    if model.kind is ModelKind.MLR:
        return pairs + 2 + 1
    return pairs + 2 + p


def sample_dataset(model: ModelSpec, n: int, seed: int) -> Dataset:
    """Draw n i.i.d. samples from the model; bit-exact per (seed, n)."""
    n = int(n)
    if n < 1:
        raise ValidationError("n must be >= 1")
    u = uniform_block(int(seed), STREAM_DATASET, n, uniforms_per_sample(model))
    y, x, mask = _impl(model).generate(model, u)
    return Dataset(model=model, n=n, seed=int(seed), y=y, x=x, mask=mask)


def _check_theta(model: ModelSpec, *thetas) -> list[np.ndarray]:
    out = []
    for theta in thetas:
        arr = np.asarray(theta, dtype=np.float64).reshape(-1)
        if arr.size != model.p:
            raise ValidationError(
                f"parameter has length {arr.size}, model expects p={model.p}"
            )
        out.append(arr)
    return out


def q_value(model: ModelSpec, theta_prime, theta, sample: Sample) -> float:
    """Surrogate objective q(θ′|θ; sample), constants included."""
    tp, t = _check_theta(model, theta_prime, theta)
    return float(_impl(model).q_value(model, tp, t, sample))


def q_gradient(model: ModelSpec, theta_prime, theta, sample: Sample) -> np.ndarray:
    """Gradient of q_value in its first argument θ′."""
    tp, t = _check_theta(model, theta_prime, theta)
    return _impl(model).q_gradient(model, tp, t, sample)


def m_step(model: ModelSpec, theta, data: Dataset) -> np.ndarray:
    """Exact maximizer over θ′ of the n-sample mean of q_value(·|θ).

    Raises
    ------
    SingularSystem
        If the MLR/RMC normal-equation matrix stays numerically singular
        after one jitter retry.
    """
    (t,) = _check_theta(model, theta)
    if data.n < 1:
        raise ValidationError("dataset is empty")
    return _impl(model).m_step(model, t, data)


def q_mean(model: ModelSpec, theta_prime, theta, data: Dataset) -> float:
    """n-sample mean of q_value (vectorized)."""
    tp, t = _check_theta(model, theta_prime, theta)
    return float(_impl(model).q_mean(model, tp, t, data))


def log_likelihood(model: ModelSpec, theta, data: Dataset) -> float:
    """Mean observed-data log-likelihood under the model's exact marginal density."""
    (t,) = _check_theta(model, theta)
    return float(_impl(model).loglik_mean(model, t, data))


def per_sample_quantities(
    model: ModelSpec, theta_prime, theta, sample: Sample
) -> PerSampleQuantities:
    """Evaluate (grv, crv, sev) for one sample at (θ′, θ)."""
    tp, t = _check_theta(model, theta_prime, theta)
    grv, crv, sev = _impl(model).per_sample(model, tp, t, sample)
    return PerSampleQuantities(grv=grv, crv=float(crv), sev=sev)


def rmc_conditional_moments(model: ModelSpec, theta, sample: Sample):
    """Conditional moments (μ_θ, A_θ, Σ_θ) of the imputed covariate vector.

    Only defined for RMC. μ_θ is the conditional mean of the full
    covariate given the observation, A_θ its conditional covariance, and
    Σ_θ = μ_θμ_θᵀ + A_θ the conditional second moment.
    """
    if model.kind is not ModelKind.RMC:
        raise ValidationError("rmc_conditional_moments requires an RMC model")
    (t,) = _check_theta(model, theta)
    return _rmc.conditional_moments(model, t, sample)


# Vectorized batch equivalents (tested against per-sample loops).


def grv_mean(model: ModelSpec, theta, data: Dataset) -> np.ndarray:
    (t,) = _check_theta(model, theta)
    return _impl(model).grv_mean(model, t, data)


def grv_rows(model: ModelSpec, theta, data: Dataset) -> np.ndarray:
    """Per-sample gradient-difference vectors as an (n, p) array."""
    (t,) = _check_theta(model, theta)
    return _impl(model).grv_rows(model, t, data)


def crv_mean(model: ModelSpec, theta_prime, theta, data: Dataset) -> float:
    tp, t = _check_theta(model, theta_prime, theta)
    return float(_impl(model).crv_mean(model, tp, t, data))


def sev_mean(model: ModelSpec, data: Dataset) -> np.ndarray:
    return _impl(model).sev_mean(model, data)


def second_moment_matrix(model: ModelSpec, theta, data: Dataset) -> np.ndarray:
    """n-sample mean of the per-sample second-moment matrix entering the CRV.

    MLR: (1/n)Σ x_kx_kᵀ (θ-free). RMC: (1/n)Σ Σ_θ(sample_k). Not defined
    for GMM, whose CRV matrix is identically I_p/1 (the crv is
    −‖θ′−θ*‖²/(2σ²) with no data dependence).
    """
    (t,) = _check_theta(model, theta)
    if model.kind is ModelKind.GMM:
        raise ValidationError("second_moment_matrix is not defined for GMM")
    return _impl(model).second_moment_matrix(model, t, data)
