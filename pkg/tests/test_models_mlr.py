"""Regression-mixture math against hand-derived values.

Complete data is (y, x, z) with z = +-1: the surrogate is
E_z[log((1/2) N(y; z<x,theta'>, sigma^2) N(x; 0, I)) | y, x, theta]
with weight w = sigmoid(2 y <x, theta>/sigma^2) on z = +1.
"""

import math

import numpy as np
import pytest

from conftest import central_difference, relative_error
from emrates import models


def _sample(y, x):
    return models.Sample(y=float(y), x=np.array(x, dtype=np.float64))


@pytest.fixture
def mlr_1d():
    return models.ModelSpec(models.ModelKind.MLR, np.array([1.0]), 1.0)


def test_q_value_hand_value(mlr_1d):
    # x = 1, y = 1, theta = 1, theta' = 0.5:
    #   w = sigmoid(2) ; quad = w (1-0.5)^2 + (1-w)(1+0.5)^2
    #   q = -quad/2 - ||x||^2/2 - log 2 - 2 log sqrt(2 pi)
    w = 1.0 / (1.0 + math.exp(-2.0))
    expected = (
        -(w * 0.25 + (1.0 - w) * 2.25) / 2.0
        - 0.5
        - math.log(2.0)
        - math.log(2.0 * math.pi)
    )
    got = models.q_value(mlr_1d, [0.5], [1.0], _sample(1.0, [1.0]))
    assert got == pytest.approx(expected, rel=1e-14)


def test_q_value_scales_with_sigma():
    # same point, sigma = 2: the response factor contributes one
    # log sigma, the covariate factor none
    model = models.ModelSpec(models.ModelKind.MLR, np.array([1.0]), 2.0)
    w = 1.0 / (1.0 + math.exp(-2.0 * 1.0 * 1.0 / 4.0))
    expected = (
        -(w * 0.25 + (1.0 - w) * 2.25) / 8.0
        - 0.5
        - math.log(2.0)
        - math.log(2.0 * math.pi)
        - math.log(2.0)
    )
    got = models.q_value(model, [0.5], [1.0], _sample(1.0, [1.0]))
    assert got == pytest.approx(expected, rel=1e-14)


def test_q_gradient_hand_value(mlr_1d):
    # ((2w - 1) y - <x, theta'>) x with 2w - 1 = tanh(1)
    got = models.q_gradient(mlr_1d, [0.5], [1.0], _sample(1.0, [1.0]))
    assert got == pytest.approx([math.tanh(1.0) - 0.5], rel=1e-14)


def test_q_gradient_matches_finite_differences(mlr_2d):
    rng = np.random.default_rng(29)
    data = models.sample_dataset(mlr_2d, 10, seed=1)
    for k in range(10):
        sample = data.sample(k)
        theta = mlr_2d.theta_star + rng.normal(scale=0.5, size=2)
        theta_prime = mlr_2d.theta_star + rng.normal(scale=0.5, size=2)
        grad = models.q_gradient(mlr_2d, theta_prime, theta, sample)
        fd = central_difference(
            lambda tp: models.q_value(mlr_2d, tp, theta, sample), theta_prime
        )
        assert relative_error(grad, fd) < 1e-7


def test_m_step_solves_normal_equations(mlr_1d):
    # two samples (y, x) = (1, 1), (-4, 2) at theta = 1:
    #   A = mean(x^2) = 5/2
    #   b = mean(tanh(y x theta) y x) = (tanh(1) + 8 tanh(8)) / 2
    data = models.Dataset(
        model=mlr_1d,
        n=2,
        seed=0,
        y=np.array([1.0, -4.0]),
        x=np.array([[1.0], [2.0]]),
    )
    expected = (math.tanh(1.0) + 8.0 * math.tanh(8.0)) / 5.0
    got = models.m_step(mlr_1d, np.array([1.0]), data)
    assert got == pytest.approx([expected], rel=1e-12)


def test_m_step_maximizes_surrogate(mlr_2d):
    data = models.sample_dataset(mlr_2d, 80, seed=11)
    theta = mlr_2d.theta_star + np.array([0.3, -0.2])
    best = models.m_step(mlr_2d, theta, data)
    q_best = models.q_mean(mlr_2d, best, theta, data)
    rng = np.random.default_rng(13)
    for _ in range(8):
        other = best + rng.normal(scale=0.2, size=2)
        assert models.q_mean(mlr_2d, other, theta, data) <= q_best


def test_log_likelihood_hand_value(mlr_1d):
    # log[(1/2) phi(y - <x,theta>) + (1/2) phi(y + <x,theta>)] + log phi(x)
    phi = lambda t: math.exp(-0.5 * t * t) / math.sqrt(2.0 * math.pi)
    data = models.Dataset(
        model=mlr_1d, n=1, seed=0, y=np.array([1.0]), x=np.array([[1.0]])
    )
    expected = math.log(0.5 * (phi(0.0) + phi(2.0))) + math.log(phi(1.0))
    assert models.log_likelihood(mlr_1d, [1.0], data) == pytest.approx(
        expected, rel=1e-14
    )


def test_curvature_value_is_theta_free_quadratic(mlr_2d):
    # -<x, theta' - theta*>^2 / (2 sigma^2), independent of theta and y
    rng = np.random.default_rng(41)
    x = rng.normal(size=2)
    theta_prime = rng.normal(size=2)
    expected = -float(x @ (theta_prime - mlr_2d.theta_star)) ** 2 / 2.0
    for theta, y in ((rng.normal(size=2), 0.3), (rng.normal(size=2), -2.0)):
        got = models.per_sample_quantities(
            mlr_2d, theta_prime, theta, _sample(y, x)
        ).crv
        assert got == pytest.approx(expected, rel=1e-13)


def test_per_sample_triple_matches_gradient_routes(mlr_2d):
    data = models.sample_dataset(mlr_2d, 8, seed=17)
    rng = np.random.default_rng(7)
    star = mlr_2d.theta_star
    for k in range(8):
        sample = data.sample(k)
        theta = star + rng.normal(scale=0.4, size=2)
        theta_prime = star + rng.normal(scale=0.4, size=2)
        out = models.per_sample_quantities(mlr_2d, theta_prime, theta, sample)
        grv_direct = models.q_gradient(
            mlr_2d, star, theta, sample
        ) - models.q_gradient(mlr_2d, star, star, sample)
        sev_direct = models.q_gradient(mlr_2d, star, star, sample)
        crv_direct = (
            models.q_value(mlr_2d, theta_prime, theta, sample)
            - models.q_value(mlr_2d, star, theta, sample)
            - models.q_gradient(mlr_2d, star, theta, sample) @ (theta_prime - star)
        )
        # the difference route cancels catastrophically when theta is
        # near truth, so compare at the gradient scale, not the grv scale
        assert np.allclose(out.grv, grv_direct, rtol=1e-9, atol=1e-12)
        assert relative_error(out.sev, sev_direct) < 1e-11
        assert out.crv == pytest.approx(crv_direct, abs=1e-11)


def test_gradient_difference_vanishes_at_truth(mlr_2d):
    data = models.sample_dataset(mlr_2d, 5, seed=23)
    for k in range(5):
        out = models.per_sample_quantities(
            mlr_2d, mlr_2d.theta_star, mlr_2d.theta_star, data.sample(k)
        )
        assert np.all(out.grv == 0.0)


def test_batch_means_match_per_sample_loops(mlr_2d):
    data = models.sample_dataset(mlr_2d, 60, seed=31)
    theta = mlr_2d.theta_star + np.array([0.25, 0.1])
    theta_prime = mlr_2d.theta_star + np.array([-0.15, 0.2])
    per = [
        models.per_sample_quantities(mlr_2d, theta_prime, theta, s)
        for s in data.samples
    ]
    assert (
        relative_error(
            models.grv_mean(mlr_2d, theta, data),
            np.mean([q.grv for q in per], axis=0),
        )
        < 1e-12
    )
    assert (
        relative_error(
            models.sev_mean(mlr_2d, data), np.mean([q.sev for q in per], axis=0)
        )
        < 1e-12
    )
    assert models.crv_mean(mlr_2d, theta_prime, theta, data) == pytest.approx(
        np.mean([q.crv for q in per]), rel=1e-12
    )
    assert models.q_mean(mlr_2d, theta_prime, theta, data) == pytest.approx(
        np.mean([models.q_value(mlr_2d, theta_prime, theta, s) for s in data.samples]),
        rel=1e-12,
    )


def test_second_moment_matrix_is_covariate_gram(mlr_2d):
    data = models.sample_dataset(mlr_2d, 30, seed=3)
    mat = models.second_moment_matrix(mlr_2d, mlr_2d.theta_star, data)
    assert np.allclose(mat, data.x.T @ data.x / 30, rtol=1e-13)
