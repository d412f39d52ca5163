import numpy as np
import pytest

from enkpf import (
    LinearGaussianObservation,
    kalman_gain,
    log_likelihood,
    scaled_gain,
)


def scalar_obs(y, r_var, state_dim=1, index=0):
    return LinearGaussianObservation.from_indices([index], np.array([[r_var]]),
                                                  np.array([y]), state_dim)


def test_loglik_at_the_observation():
    obs = scalar_obs(y=0.7, r_var=1.0)
    assert np.isclose(log_likelihood(np.array([0.7]), obs), -0.5 * np.log(2 * np.pi))


def test_loglik_half_variance_value():
    # log phi(0; 1, 0.5) = -0.5 log(pi) - 1
    obs = scalar_obs(y=0.0, r_var=0.5)
    assert np.isclose(log_likelihood(np.array([1.0]), obs), -0.5 * np.log(np.pi) - 1.0)


def test_loglik_temper_scales_differences():
    gen = np.random.default_rng(3)
    obs = LinearGaussianObservation.from_indices(
        [0, 2], np.diag([0.5, 2.0]), np.array([0.3, -1.0]), 4)
    x1 = gen.standard_normal(4)
    x2 = gen.standard_normal(4)
    for temper in (0.2, 0.55, 0.9):
        lhs = log_likelihood(x1, obs, temper) - log_likelihood(x2, obs, temper)
        rhs = temper * (log_likelihood(x1, obs) - log_likelihood(x2, obs))
        assert np.isclose(lhs, rhs)


def test_loglik_rejects_nonfinite_state():
    obs = scalar_obs(y=0.0, r_var=1.0)
    with pytest.raises(ValueError):
        log_likelihood(np.array([np.inf]), obs)


def test_loglik_matrix_argument_matches_columns():
    obs = LinearGaussianObservation.from_indices(
        [1, 3], np.diag([0.4, 0.9]), np.array([0.0, 1.0]), 5)
    gen = np.random.default_rng(8)
    states = gen.standard_normal((5, 6))
    batch = log_likelihood(states, obs)
    single = [log_likelihood(states[:, j], obs) for j in range(6)]
    assert np.allclose(batch, single)


def test_kalman_gain_scalar():
    obs = scalar_obs(y=0.0, r_var=1.0)
    assert np.allclose(kalman_gain(np.array([[1.0]]), obs), 0.5)
    assert np.all(kalman_gain(np.array([[0.0]]), obs) == 0.0)


def test_kalman_gain_partial_observation():
    obs = LinearGaussianObservation.from_matrix(
        np.array([[1.0, 0.0]]), np.array([[0.5]]), np.array([0.0]))
    K = kalman_gain(np.eye(2), obs)
    assert np.allclose(K, np.array([[2.0 / 3.0], [0.0]]))


def test_gain_solves_normal_equations():
    gen = np.random.default_rng(4)
    for _ in range(10):
        q, r = 7, 3
        A = gen.standard_normal((q, q))
        P = A @ A.T + 0.1 * np.eye(q)
        H = gen.standard_normal((r, q))
        R = np.diag(gen.uniform(0.2, 2.0, r))
        obs = LinearGaussianObservation.from_matrix(H, R, gen.standard_normal(r))
        K = kalman_gain(P, obs)
        resid = K @ (H @ P @ H.T + R) - P @ H.T
        assert np.linalg.norm(resid) <= 1e-10 * np.linalg.norm(P @ H.T)


def test_scaled_gain_endpoints():
    gen = np.random.default_rng(5)
    A = gen.standard_normal((4, 4))
    P = A @ A.T + 0.2 * np.eye(4)
    obs = LinearGaussianObservation.from_indices(
        [0, 3], np.diag([1.0, 0.7]), np.array([0.1, -0.4]), 4)
    assert np.array_equal(scaled_gain(P, obs, 1.0), kalman_gain(P, obs))
    assert np.all(scaled_gain(P, obs, 0.0) == 0.0)


def test_scaled_gain_equals_inflated_noise_form():
    # P H' (H P H' + R/g)^-1 written directly, vs the reduced-covariance gain
    gen = np.random.default_rng(6)
    gamma = 0.37
    for _ in range(10):
        A = gen.standard_normal((6, 6))
        P = A @ A.T + 0.1 * np.eye(6)
        H = gen.standard_normal((2, 6))
        R = np.diag(gen.uniform(0.3, 1.5, 2))
        obs = LinearGaussianObservation.from_matrix(H, R, np.zeros(2))
        direct = P @ H.T @ np.linalg.inv(H @ P @ H.T + R / gamma)
        K = scaled_gain(P, obs, gamma)
        assert np.linalg.norm(K - direct) <= 1e-10 * np.linalg.norm(direct)


def test_scaled_gain_continuous_in_gamma():
    gen = np.random.default_rng(7)
    A = gen.standard_normal((5, 5))
    P = A @ A.T + 0.3 * np.eye(5)
    obs = LinearGaussianObservation.from_indices(
        [1, 4], np.diag([0.5, 0.5]), np.zeros(2), 5)
    for gamma in (0.1, 0.5, 0.9):
        d = scaled_gain(P, obs, gamma + 1e-6) - scaled_gain(P, obs, gamma)
        assert np.linalg.norm(d) < 1e-4


def test_selection_form_matches_dense_matrix():
    gen = np.random.default_rng(9)
    idx = [0, 2, 3]
    H = np.zeros((3, 5))
    H[np.arange(3), idx] = 1.0
    R = np.diag([0.5, 1.0, 2.0])
    y = gen.standard_normal(3)
    sel = LinearGaussianObservation.from_indices(idx, R, y, 5)
    dense = LinearGaussianObservation.from_matrix(H, R, y)
    A = gen.standard_normal((5, 5))
    P = A @ A.T + 0.1 * np.eye(5)
    x = gen.standard_normal(5)
    assert np.allclose(log_likelihood(x, sel, 0.7), log_likelihood(x, dense, 0.7))
    assert np.allclose(kalman_gain(P, sel), kalman_gain(P, dense))
    assert np.allclose(sel.apply_h(x), dense.apply_h(x))
    assert np.allclose(sel.hp_ht(P), dense.hp_ht(P))


def test_observation_validation():
    with pytest.raises(Exception):
        # R not positive definite
        LinearGaussianObservation.from_indices([0], np.array([[-1.0]]), np.array([0.0]), 2)
    with pytest.raises(ValueError):
        LinearGaussianObservation.from_indices([5], np.array([[1.0]]), np.array([0.0]), 2)
    with pytest.raises(ValueError):
        LinearGaussianObservation.from_matrix(
            np.array([[0.0, 0.0]]), np.array([[1.0]]), np.array([0.0]))


def test_draw_noise_covariance():
    obs = LinearGaussianObservation.from_indices(
        [0, 1], np.array([[2.0, 0.6], [0.6, 1.0]]), np.zeros(2), 2)
    gen = np.random.default_rng(10)
    eps = obs.draw_noise(gen, 200_000)
    cov = np.cov(eps)
    assert np.allclose(cov, obs.R, atol=0.02)
