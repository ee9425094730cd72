import numpy as np
import pytest

from superocc import _backend, _fallback

core = pytest.importorskip("superocc._core")


def test_pivoted_cholesky_parity():
    pos = np.ascontiguousarray(np.random.default_rng(0).uniform(-2, 2, size=(80, 2)))
    for kind in (_backend.GAUSSIAN, _backend.EXPONENTIAL):
        a = core.pivoted_cholesky(pos, kind, 1.3, 0.8, 1e-12, 80)
        b = _fallback.pivoted_cholesky(pos, kind, 1.3, 0.8, 1e-12, 80)
        assert a.shape == b.shape
        np.testing.assert_allclose(a @ a.T, b @ b.T, atol=1e-10)


def test_ou_chain_parity():
    xs = np.sort(np.random.default_rng(1).uniform(-3, 3, 50))
    z = np.random.default_rng(2).standard_normal(50)
    np.testing.assert_allclose(core.ou_chain(xs, z, 2.0, 0.5), _fallback.ou_chain(xs, z, 2.0, 0.5), rtol=1e-13)


def test_heat_sum_parity():
    pos = np.ascontiguousarray(np.random.default_rng(3).normal(size=(100, 3)))
    a = np.array([0.1, 0.0, -0.2])
    assert core.heat_sum(pos, a, 0.3) == pytest.approx(_fallback.heat_sum(pos, a, 0.3), rel=1e-13)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_density_accumulate_parity(d):
    rng = np.random.default_rng(d)
    pos = np.ascontiguousarray(rng.normal(size=(60, d)))
    shape = np.array([9] * d, dtype=np.int64)
    origin = np.full(d, -2.0)
    step = np.full(d, 0.5)
    a = np.zeros(int(np.prod(shape)))
    b = np.zeros_like(a)
    core.density_accumulate(pos, 0.01, 0.05, origin, step, shape.astype(np.int_), a, 9.0)
    _fallback.density_accumulate(pos, 0.01, 0.05, origin, step, shape, b, 9.0)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-300)


def test_backend_selected():
    assert _backend.BACKEND in ("cython", "numpy")
