"""EM driver: monotonicity invariants, stopping logic, failure paths."""

import numpy as np
import pytest

from emrates import em, models
from emrates._linalg import solve_spd
from emrates.errors import SingularSystem, ValidationError


def _setup(kind):
    if kind is models.ModelKind.GMM:
        model = models.ModelSpec(kind, np.array([1.0, 0.5, 0.0]), 1.0)
        offset = np.array([0.4, -0.3, 0.2])
    elif kind is models.ModelKind.MLR:
        model = models.ModelSpec(kind, np.array([1.0, -0.5]), 1.0)
        offset = np.array([0.3, 0.3])
    else:
        model = models.ModelSpec(
            kind, np.array([1.0, 0.5]), 1.0, epsilon_miss=0.2
        )
        offset = np.array([-0.3, 0.2])
    data = models.sample_dataset(model, 400, seed=7)
    return model, data, model.theta_star + offset


@pytest.mark.parametrize("kind", list(models.ModelKind))
def test_surrogate_and_likelihood_never_decrease(kind):
    model, data, theta0 = _setup(kind)
    traj = em.run_em(model, data, theta0, max_iters=25, param_tol=0.0)
    assert np.all(traj.q_gains >= -1e-10)
    assert np.all(np.diff(traj.loglik) >= -1e-10)


@pytest.mark.parametrize("kind", list(models.ModelKind))
def test_errors_track_distance_to_truth(kind):
    model, data, theta0 = _setup(kind)
    traj = em.run_em(model, data, theta0, max_iters=10, param_tol=0.0)
    dists = np.linalg.norm(traj.iterates - model.theta_star, axis=1)
    assert np.allclose(traj.errors, dists, rtol=1e-15, atol=0.0)
    assert traj.errors[0] == np.linalg.norm(theta0 - model.theta_star)


def test_trajectory_shapes_and_metadata():
    model, data, theta0 = _setup(models.ModelKind.GMM)
    traj = em.run_em(model, data, theta0, max_iters=6, param_tol=0.0)
    assert traj.iterates.shape == (7, 3)
    assert traj.errors.shape == (7,)
    assert traj.q_gains.shape == (6,)
    assert traj.loglik.shape == (7,)
    assert traj.n_steps == 6
    assert traj.dataset_seed == 7
    assert traj.stopped_reason is em.StoppedReason.MAX_ITERS
    assert traj.max_error() == np.max(traj.errors)


def test_runs_are_bit_reproducible():
    model, data, theta0 = _setup(models.ModelKind.MLR)
    a = em.run_em(model, data, theta0, max_iters=12, param_tol=0.0)
    b = em.run_em(model, data, theta0, max_iters=12, param_tol=0.0)
    assert np.array_equal(a.iterates, b.iterates)
    assert np.array_equal(a.errors, b.errors)
    assert np.array_equal(a.q_gains, b.q_gains)
    assert np.array_equal(a.loglik, b.loglik)


def test_param_tol_stops_after_one_step():
    model, data, theta0 = _setup(models.ModelKind.GMM)
    traj = em.run_em(model, data, theta0, max_iters=50, param_tol=10.0)
    assert traj.n_steps == 1
    assert traj.stopped_reason is em.StoppedReason.PARAM_TOL
    assert traj.stopped_reason.value == "param_tol"


def test_param_tol_zero_runs_to_max_iters():
    model, data, theta0 = _setup(models.ModelKind.GMM)
    traj = em.run_em(model, data, theta0, max_iters=4, param_tol=0.0)
    assert traj.n_steps == 4
    assert traj.stopped_reason.value == "max_iters"


def test_run_em_argument_validation():
    model, data, theta0 = _setup(models.ModelKind.GMM)
    with pytest.raises(ValidationError, match="max_iters"):
        em.run_em(model, data, theta0, max_iters=0, param_tol=0.0)
    with pytest.raises(ValidationError, match="param_tol"):
        em.run_em(model, data, theta0, max_iters=5, param_tol=-1.0)
    with pytest.raises(ValidationError, match=r"expected \(3,\)"):
        em.run_em(model, data, np.zeros(2), max_iters=5, param_tol=0.0)


def test_singular_m_step_reports_iteration(monkeypatch):
    model, data, theta0 = _setup(models.ModelKind.MLR)
    real = models.m_step
    calls = {"k": 0}

    def flaky(m, theta, d):
        if calls["k"] == 2:
            raise SingularSystem("forced failure")
        calls["k"] += 1
        return real(m, theta, d)

    monkeypatch.setattr(em.models, "m_step", flaky)
    with pytest.raises(SingularSystem) as excinfo:
        em.run_em(model, data, theta0, max_iters=10, param_tol=0.0)
    assert excinfo.value.iteration == 2


def test_trajectory_length_validation():
    with pytest.raises(ValidationError, match="equal length"):
        em.EMTrajectory(
            iterates=np.zeros((3, 1)),
            errors=np.zeros(2),
            q_gains=np.zeros(2),
            loglik=np.zeros(3),
            dataset_seed=0,
            stopped_reason=em.StoppedReason.MAX_ITERS,
        )
    with pytest.raises(ValidationError, match="per transition"):
        em.EMTrajectory(
            iterates=np.zeros((3, 1)),
            errors=np.zeros(3),
            q_gains=np.zeros(3),
            loglik=np.zeros(3),
            dataset_seed=0,
            stopped_reason=em.StoppedReason.MAX_ITERS,
        )


def test_exited_radius_diagnostic():
    traj = em.EMTrajectory(
        iterates=np.array([[0.5], [0.2], [0.1]]),
        errors=np.array([0.5, 0.2, 0.1]),
        q_gains=np.zeros(2),
        loglik=np.zeros(3),
        dataset_seed=0,
        stopped_reason=em.StoppedReason.MAX_ITERS,
    )
    assert traj.exited_radius(0.4)
    assert not traj.exited_radius(0.5)


def test_solve_spd_rejects_indefinite_and_nan():
    with pytest.raises(SingularSystem, match="singular"):
        solve_spd(np.array([[1.0, 0.0], [0.0, -1.0]]), np.ones(2))
    with pytest.raises(SingularSystem):
        solve_spd(np.full((2, 2), np.nan), np.ones(2))


def test_solve_spd_jitter_rescues_rank_deficiency():
    a = np.array([[1.0, 1.0], [1.0, 1.0]])
    x = solve_spd(a, np.array([2.0, 2.0]))
    assert np.all(np.isfinite(x))
    assert np.allclose(a @ x, [2.0, 2.0], atol=1e-6)


def test_solve_spd_exact_on_well_conditioned_system():
    a = np.array([[4.0, 1.0], [1.0, 3.0]])
    b = np.array([1.0, 2.0])
    assert np.allclose(solve_spd(a, b), np.linalg.solve(a, b), rtol=1e-13)
