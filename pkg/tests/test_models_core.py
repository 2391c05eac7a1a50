"""Model/dataset plumbing: validation, sampling layout, immutability."""

import numpy as np
import pytest

from emrates import models
from emrates._rng import STREAM_DATASET, uniform_block
from emrates.errors import ValidationError


def test_model_spec_validation():
    with pytest.raises(ValidationError):
        models.ModelSpec(models.ModelKind.GMM, np.array([]), 1.0)
    with pytest.raises(ValidationError):
        models.ModelSpec(models.ModelKind.GMM, np.array([1.0]), 0.0)
    with pytest.raises(ValidationError):
        models.ModelSpec(models.ModelKind.GMM, np.array([1.0]), -2.0)
    with pytest.raises(ValidationError):
        models.ModelSpec(models.ModelKind.GMM, np.array([np.inf]), 1.0)
    with pytest.raises(ValidationError):
        models.ModelSpec(models.ModelKind.RMC, np.array([1.0]), 1.0, epsilon_miss=1.0)


def test_missingness_only_allowed_for_rmc():
    with pytest.raises(ValidationError):
        models.ModelSpec(models.ModelKind.GMM, np.array([1.0]), 1.0, epsilon_miss=0.1)
    with pytest.raises(ValidationError):
        models.ModelSpec(models.ModelKind.MLR, np.array([1.0]), 1.0, epsilon_miss=0.1)
    spec = models.ModelSpec(
        models.ModelKind.RMC, np.array([1.0]), 1.0, epsilon_miss=0.1
    )
    assert spec.epsilon_miss == 0.1


def test_model_spec_accepts_string_kind_and_is_frozen():
    spec = models.ModelSpec("MLR", [1.0, 2.0], 0.5)
    assert spec.kind is models.ModelKind.MLR
    assert spec.p == 2
    assert spec.snr == pytest.approx(np.sqrt(5.0) / 0.5)
    with pytest.raises(ValueError):
        spec.theta_star[0] = 9.0


@pytest.mark.parametrize("kind", list(models.ModelKind))
def test_sample_dataset_shapes(kind):
    eps = 0.25 if kind is models.ModelKind.RMC else 0.0
    model = models.ModelSpec(kind, np.array([1.0, -0.5, 0.25]), 0.8, epsilon_miss=eps)
    data = models.sample_dataset(model, 17, seed=4)
    assert data.n == 17
    assert data.seed == 4
    if kind is models.ModelKind.GMM:
        assert data.y.shape == (17, 3)
        assert data.x is None and data.mask is None
    else:
        assert data.y.shape == (17,)
        assert data.x.shape == (17, 3)
    if kind is models.ModelKind.RMC:
        assert data.mask.shape == (17, 3)
        assert set(np.unique(data.mask)) <= {0.0, 1.0}
        assert np.all(data.x[data.mask == 0] == 0.0)


@pytest.mark.parametrize("kind", list(models.ModelKind))
def test_sample_dataset_bit_reproducible(kind):
    eps = 0.25 if kind is models.ModelKind.RMC else 0.0
    model = models.ModelSpec(kind, np.array([1.0, 2.0]), 1.0, epsilon_miss=eps)
    a = models.sample_dataset(model, 40, seed=7)
    b = models.sample_dataset(model, 40, seed=7)
    assert np.array_equal(a.y, b.y)
    for left, right in ((a.x, b.x), (a.mask, b.mask)):
        assert (left is None) == (right is None)
        if left is not None:
            assert np.array_equal(left, right)


def test_sample_k_is_independent_of_n():
    # the per-sample word budget makes row k a function of (seed, k)
    model = models.ModelSpec(models.ModelKind.MLR, np.array([1.0, 2.0]), 1.0)
    small = models.sample_dataset(model, 5, seed=13)
    large = models.sample_dataset(model, 50, seed=13)
    assert np.array_equal(small.y, large.y[:5])
    assert np.array_equal(small.x, large.x[:5])


def test_sample_dataset_rejects_empty():
    model = models.ModelSpec(models.ModelKind.GMM, np.array([1.0]), 1.0)
    with pytest.raises(ValidationError, match="n must be >= 1"):
        models.sample_dataset(model, 0, seed=0)


def test_uniforms_per_sample_layout():
    gmm = models.ModelSpec(models.ModelKind.GMM, np.zeros(3) + 1.0, 1.0)
    mlr = models.ModelSpec(models.ModelKind.MLR, np.zeros(3) + 1.0, 1.0)
    rmc = models.ModelSpec(models.ModelKind.RMC, np.zeros(3) + 1.0, 1.0, 0.1)
    # p=3 rounds up to 4 normal-generating words
    assert models.uniforms_per_sample(gmm) == 5
    assert models.uniforms_per_sample(mlr) == 7
    assert models.uniforms_per_sample(rmc) == 9
    block = uniform_block(3, STREAM_DATASET, 6, models.uniforms_per_sample(gmm))
    assert block.shape == (6, 5)


def test_dataset_sample_view(rmc_2d):
    data = models.sample_dataset(rmc_2d, 9, seed=1)
    assert len(data.samples) == 9
    one = data.sample(4)
    assert one.y == data.y[4]
    assert np.array_equal(one.x, data.x[4])
    assert np.array_equal(one.mask, data.mask[4])
    assert [s.y for s in data.samples[2:4]] == [data.y[2], data.y[3]]
    with pytest.raises(IndexError):
        data.sample(9)


def test_dataset_arrays_read_only(gmm_1d):
    data = models.sample_dataset(gmm_1d, 3, seed=0)
    with pytest.raises(ValueError):
        data.y[0, 0] = 7.0


def test_parameter_length_checked(gmm_1d):
    data = models.sample_dataset(gmm_1d, 3, seed=0)
    with pytest.raises(ValidationError, match="length 2"):
        models.m_step(gmm_1d, np.array([1.0, 2.0]), data)


def test_gmm_signal_magnitudes():
    # y = z theta* + sigma w: the empirical mean of |y_0| should sit near
    # E|z + 0.1 w| ~ 1 for a strong signal
    model = models.ModelSpec(models.ModelKind.GMM, np.array([1.0, 0.0]), 0.1)
    data = models.sample_dataset(model, 4000, seed=5)
    assert abs(np.mean(np.abs(data.y[:, 0])) - 1.0) < 0.02
    assert abs(np.mean(np.abs(data.y[:, 1]))) < 0.12


def test_rmc_mask_frequency():
    model = models.ModelSpec(
        models.ModelKind.RMC, np.array([1.0, 1.0]), 1.0, epsilon_miss=0.2
    )
    data = models.sample_dataset(model, 20_000, seed=2)
    observed_fraction = data.mask.mean()
    assert abs(observed_fraction - 0.8) < 0.01
