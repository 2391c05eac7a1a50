"""Shared fixtures and numeric helpers for the test suite."""

import numpy as np
import pytest

from emrates import models

# Verdict lines registered by the acceptance tests, echoed after the
# run summary so they survive pytest's per-test output capture.
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def central_difference(f, theta, h=1e-6):
    """Coordinate-wise central difference of a scalar function."""
    theta = np.asarray(theta, dtype=np.float64)
    grad = np.zeros_like(theta)
    for j in range(theta.size):
        hj = h * (1.0 + abs(theta[j]))
        up = theta.copy()
        dn = theta.copy()
        up[j] += hj
        dn[j] -= hj
        grad[j] = (f(up) - f(dn)) / (2.0 * hj)
    return grad


def relative_error(got, expected):
    got = np.asarray(got, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    scale = max(1e-12, float(np.linalg.norm(expected)))
    return float(np.linalg.norm(got - expected)) / scale


@pytest.fixture
def gmm_1d():
    return models.ModelSpec(models.ModelKind.GMM, np.array([1.0]), 1.0)


@pytest.fixture
def gmm_5d():
    theta = np.zeros(5)
    theta[0] = 1.0
    return models.ModelSpec(models.ModelKind.GMM, theta, 1.0)


@pytest.fixture
def mlr_2d():
    return models.ModelSpec(models.ModelKind.MLR, np.array([1.0, -0.5]), 1.0)


@pytest.fixture
def rmc_2d():
    return models.ModelSpec(
        models.ModelKind.RMC, np.array([1.0, 0.5]), 1.0, epsilon_miss=0.3
    )
