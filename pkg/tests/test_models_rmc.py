"""Missing-covariate regression math against hand-derived values.

The latent object is the full covariate vector; conditioning on the
observed coordinates and the response gives Gaussian moments (mu, A)
that everything else is assembled from.
"""

import math

import numpy as np
import pytest

from conftest import central_difference, relative_error
from emrates import models
from emrates.errors import ValidationError

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@pytest.fixture
def rmc_hand():
    # theta* = (1, 1), sigma = 1, 25% missingness
    return models.ModelSpec(
        models.ModelKind.RMC, np.array([1.0, 1.0]), 1.0, epsilon_miss=0.25
    )


def _hand_sample():
    # second coordinate missing, first observed at 2, response 3
    return models.Sample(
        y=3.0,
        x=np.array([2.0, 0.0]),
        mask=np.array([1.0, 0.0]),
    )


def test_conditional_moments_hand_values(rmc_hand):
    # d = sigma^2 + ||theta_miss||^2 = 2
    # mu = x_obs + (y - <theta, x_obs>)/d * theta_miss = (2, 0.5)
    # A  = diag(miss) - theta_miss theta_miss^T / d = diag(0, 0.5)
    mu, a_mat, second = models.rmc_conditional_moments(
        rmc_hand, rmc_hand.theta_star, _hand_sample()
    )
    assert mu == pytest.approx([2.0, 0.5], rel=1e-15)
    assert np.allclose(a_mat, np.diag([0.0, 0.5]), rtol=1e-15, atol=0.0)
    assert np.allclose(second, [[4.0, 1.0], [1.0, 0.75]], rtol=1e-15, atol=0.0)


def test_conditional_moments_rejects_other_kinds(gmm_1d):
    with pytest.raises(ValidationError):
        models.rmc_conditional_moments(
            gmm_1d, gmm_1d.theta_star, models.Sample(y=np.array([1.0]))
        )


def test_conditional_moments_fully_observed(rmc_hand):
    # nothing missing: mu is the covariate itself, no imputation spread
    sample = models.Sample(
        y=1.0, x=np.array([0.4, -1.2]), mask=np.array([1.0, 1.0])
    )
    mu, a_mat, second = models.rmc_conditional_moments(
        rmc_hand, np.array([2.0, -1.0]), sample
    )
    assert np.all(mu == sample.x)
    assert np.all(a_mat == 0.0)
    assert np.allclose(second, np.outer(sample.x, sample.x), rtol=1e-15, atol=0.0)


def test_q_value_hand_value(rmc_hand):
    # theta' = (1, 0) at the hand sample:
    #   quadratic piece: -(y^2 - 2 y <theta', mu> + theta'^T Sigma theta')/2 = -1/2
    #   spread piece: -tr(Sigma)/2 = -4.75/2
    #   constants: -(p+1) log sqrt(2 pi), mask prob log(3/4) + log(1/4)
    expected = (
        -0.5
        - 2.375
        - 3.0 * LOG_SQRT_2PI
        + math.log(0.75)
        + math.log(0.25)
    )
    got = models.q_value(
        rmc_hand, [1.0, 0.0], rmc_hand.theta_star, _hand_sample()
    )
    assert got == pytest.approx(expected, rel=1e-14)
    assert got == pytest.approx(-7.3057920331856895, rel=1e-14)


def test_q_value_minus_inf_for_impossible_mask():
    # epsilon_miss = 0 assigns probability zero to any missing entry
    model = models.ModelSpec(
        models.ModelKind.RMC, np.array([1.0, 1.0]), 1.0, epsilon_miss=0.0
    )
    q = models.q_value(model, [1.0, 0.0], model.theta_star, _hand_sample())
    assert q == -math.inf
    data = models.Dataset(
        model=model,
        n=1,
        seed=0,
        y=np.array([3.0]),
        x=np.array([[2.0, 0.0]]),
        mask=np.array([[1.0, 0.0]]),
    )
    assert models.log_likelihood(model, model.theta_star, data) == -math.inf


def test_q_gradient_matches_finite_differences(rmc_2d):
    rng = np.random.default_rng(59)
    data = models.sample_dataset(rmc_2d, 12, seed=5)
    for k in range(12):
        sample = data.sample(k)
        theta = rmc_2d.theta_star + rng.normal(scale=0.4, size=2)
        theta_prime = rmc_2d.theta_star + rng.normal(scale=0.4, size=2)
        grad = models.q_gradient(rmc_2d, theta_prime, theta, sample)
        fd = central_difference(
            lambda tp: models.q_value(rmc_2d, tp, theta, sample), theta_prime
        )
        assert relative_error(grad, fd) < 1e-7


def test_m_step_reduces_to_least_squares_without_missingness():
    # with every coordinate observed the update is ordinary least squares
    # and does not depend on the current iterate
    model = models.ModelSpec(
        models.ModelKind.RMC, np.array([1.5, -0.5]), 1.0, epsilon_miss=0.0
    )
    data = models.sample_dataset(model, 40, seed=21)
    assert np.all(data.mask == 1.0)
    ls = np.linalg.solve(data.x.T @ data.x / 40, data.x.T @ data.y / 40)
    for theta in (model.theta_star, np.array([0.2, 2.0])):
        got = models.m_step(model, theta, data)
        assert relative_error(got, ls) < 1e-12


def test_m_step_maximizes_surrogate(rmc_2d):
    data = models.sample_dataset(rmc_2d, 60, seed=9)
    theta = rmc_2d.theta_star + np.array([0.3, -0.25])
    best = models.m_step(rmc_2d, theta, data)
    q_best = models.q_mean(rmc_2d, best, theta, data)
    rng = np.random.default_rng(2)
    for _ in range(8):
        other = best + rng.normal(scale=0.2, size=2)
        assert models.q_mean(rmc_2d, other, theta, data) <= q_best


def test_curvature_value_uses_conditional_second_moment(rmc_2d):
    # crv = -(theta' - theta*)^T Sigma_theta (theta' - theta*) / (2 sigma^2)
    data = models.sample_dataset(rmc_2d, 6, seed=33)
    rng = np.random.default_rng(14)
    for k in range(6):
        sample = data.sample(k)
        theta = rmc_2d.theta_star + rng.normal(scale=0.3, size=2)
        theta_prime = rmc_2d.theta_star + rng.normal(scale=0.3, size=2)
        _, _, second = models.rmc_conditional_moments(rmc_2d, theta, sample)
        delta = theta_prime - rmc_2d.theta_star
        expected = -float(delta @ second @ delta) / 2.0
        got = models.per_sample_quantities(rmc_2d, theta_prime, theta, sample).crv
        assert got == pytest.approx(expected, rel=1e-12, abs=1e-15)


def test_per_sample_triple_matches_gradient_routes(rmc_2d):
    data = models.sample_dataset(rmc_2d, 8, seed=45)
    rng = np.random.default_rng(8)
    star = rmc_2d.theta_star
    for k in range(8):
        sample = data.sample(k)
        theta = star + rng.normal(scale=0.3, size=2)
        theta_prime = star + rng.normal(scale=0.3, size=2)
        out = models.per_sample_quantities(rmc_2d, theta_prime, theta, sample)
        grv_direct = models.q_gradient(
            rmc_2d, star, theta, sample
        ) - models.q_gradient(rmc_2d, star, star, sample)
        sev_direct = models.q_gradient(rmc_2d, star, star, sample)
        crv_direct = (
            models.q_value(rmc_2d, theta_prime, theta, sample)
            - models.q_value(rmc_2d, star, theta, sample)
            - models.q_gradient(rmc_2d, star, theta, sample) @ (theta_prime - star)
        )
        assert np.allclose(out.grv, grv_direct, rtol=1e-9, atol=1e-12)
        assert relative_error(out.sev, sev_direct) < 1e-11
        assert out.crv == pytest.approx(crv_direct, abs=1e-10)


def test_batch_means_match_per_sample_loops(rmc_2d):
    data = models.sample_dataset(rmc_2d, 50, seed=61)
    theta = rmc_2d.theta_star + np.array([0.2, 0.15])
    theta_prime = rmc_2d.theta_star + np.array([-0.1, 0.25])
    per = [
        models.per_sample_quantities(rmc_2d, theta_prime, theta, s)
        for s in data.samples
    ]
    rows = models.grv_rows(rmc_2d, theta, data)
    assert rows.shape == (50, 2)
    assert relative_error(rows, np.array([q.grv for q in per])) < 1e-11
    assert (
        relative_error(
            models.grv_mean(rmc_2d, theta, data),
            np.mean([q.grv for q in per], axis=0),
        )
        < 1e-11
    )
    assert (
        relative_error(
            models.sev_mean(rmc_2d, data), np.mean([q.sev for q in per], axis=0)
        )
        < 1e-11
    )
    assert models.crv_mean(rmc_2d, theta_prime, theta, data) == pytest.approx(
        np.mean([q.crv for q in per]), rel=1e-12
    )
    assert models.q_mean(rmc_2d, theta_prime, theta, data) == pytest.approx(
        np.mean([models.q_value(rmc_2d, theta_prime, theta, s) for s in data.samples]),
        rel=1e-12,
    )
    second = models.second_moment_matrix(rmc_2d, theta, data)
    loop = np.mean(
        [
            models.rmc_conditional_moments(rmc_2d, theta, s)[2]
            for s in data.samples
        ],
        axis=0,
    )
    assert relative_error(second, loop) < 1e-12


def test_log_likelihood_hand_value(rmc_hand):
    # observed coords are standard normal; the response given them is
    # N(<theta, x_obs>, sigma^2 + ||theta_miss||^2); mask has its own mass
    data = models.Dataset(
        model=rmc_hand,
        n=1,
        seed=0,
        y=np.array([3.0]),
        x=np.array([[2.0, 0.0]]),
        mask=np.array([[1.0, 0.0]]),
    )
    expected = (
        -((3.0 - 2.0) ** 2) / (2.0 * 2.0)
        - 0.5 * math.log(2.0)
        - LOG_SQRT_2PI
        - (2.0**2) / 2.0
        - LOG_SQRT_2PI
        + math.log(0.75)
        + math.log(0.25)
    )
    got = models.log_likelihood(rmc_hand, rmc_hand.theta_star, data)
    assert got == pytest.approx(expected, rel=1e-13)
