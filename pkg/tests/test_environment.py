import numpy as np
import pytest

from superocc import environment as env
from superocc.errors import DomainError, FactorizationError
from superocc.experiments import environment_covariance_check


def test_constant_kernel_identical_values():
    inc = env.sample_increment(env.Constant(1.0), [[0.0], [5.0], [-3.0]], 0.04, env.replicate_rng(0, 0))
    assert inc.values[0] == inc.values[1] == inc.values[2]


def test_zero_kernel_and_empty_positions():
    rng = env.replicate_rng(0, 0)
    assert np.all(env.sample_field(env.Zero(), np.zeros((4, 2)), rng) == 0)
    assert env.sample_field(env.GaussianKernel(1.0, 1.0), np.zeros((0, 1)), rng).shape == (0,)


def test_increment_is_deterministic_for_equal_state():
    pos = np.linspace(-1, 1, 20)[:, None]
    k = env.GaussianKernel(1.0, 0.5)
    a = env.sample_increment(k, pos, 0.01, env.replicate_rng(7, 3)).values
    b = env.sample_increment(k, pos, 0.01, env.replicate_rng(7, 3)).values
    assert np.array_equal(a, b)


def test_increment_rejects_nonpositive_dt():
    with pytest.raises(DomainError):
        env.sample_increment(env.Constant(1.0), [[0.0]], 0.0, env.replicate_rng(0, 0))


def test_covariance_example_gaussian():
    rep = environment_covariance_check(env.GaussianKernel(1.0, 1.0), [[0.0], [0.5], [2.0]], 0.04, 20000, seed=2)
    assert rep["max_z_cov"] <= 4.0
    assert rep["max_z_cross"] <= 4.0


def test_exponential_ou_chain_matches_dense_covariance():
    pos = np.array([0.3, -1.0, 0.0, 2.0])
    k = env.ExponentialKernel(2.0, 0.7)
    rng = env.replicate_rng(1, 0)
    draws = np.array([env.sample_field(k, pos, rng, "markov") for _ in range(20000)])
    G = env.covariance_matrix(k, pos)
    se = np.sqrt((np.outer(np.diag(G), np.diag(G)) + G**2) / draws.shape[0])
    assert np.max(np.abs(np.cov(draws.T, bias=True) - G) / se) < 4.5


def test_lowrank_factor_reproduces_covariance():
    pos = np.random.default_rng(0).uniform(-2, 2, size=(200, 1))
    k = env.GaussianKernel(1.0, 1.0)
    L = env.factor(k, pos, "lowrank")
    G = env.covariance_matrix(k, pos)
    assert L.shape[1] < 200
    assert np.max(np.abs(L @ L.T - G)) < 1e-8


def test_dense_factor_exact_for_small_sets():
    pos = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]])
    k = env.ExponentialKernel(1.0, 1.0)
    L = env.factor(k, pos, "dense")
    np.testing.assert_allclose(L @ L.T, env.covariance_matrix(k, pos), atol=1e-12)


def test_duplicate_positions_need_jitter_but_succeed():
    pos = np.zeros((5, 1))
    L = env.cholesky_with_jitter(env.covariance_matrix(env.GaussianKernel(1.0, 1.0), pos))
    assert np.all(np.isfinite(L))


def test_non_psd_matrix_raises():
    G = np.array([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(FactorizationError):
        env.cholesky_with_jitter(G)


def test_kernel_dict_roundtrip():
    for k in (env.Zero(), env.Constant(0.3), env.GaussianKernel(1.0, 2.0), env.ExponentialKernel(0.5, 1.0)):
        assert env.kernel_from_dict(env.kernel_to_dict(k)) == k
    with pytest.raises(DomainError):
        env.kernel_from_dict({"kind": "matern"})


def test_kernel_parameters_validated():
    with pytest.raises(DomainError):
        env.Constant(-1.0)
    with pytest.raises(DomainError):
        env.GaussianKernel(1.0, 0.0)


def test_replicate_streams_independent():
    a = env.replicate_rng(0, 0).standard_normal(4)
    b = env.replicate_rng(0, 1).standard_normal(4)
    c = env.replicate_rng(0, 0, 1).standard_normal(4)
    assert not np.array_equal(a, b) and not np.array_equal(a, c)
