"""Property-based checks of the stated invariants."""
import math

import numpy as np
from hypothesis import given, settings, strategies as st

from superocc import environment as env
from superocc import kernels as K
from superocc import particles as P
from superocc.occupation import OccupationAccumulator
from superocc.oracles import z_score

times = st.floats(0.01, 5.0)
coords = st.floats(-3.0, 3.0)
dims = st.integers(1, 3)
SETTINGS = settings(max_examples=40, deadline=None)


@SETTINGS
@given(times, st.lists(coords, min_size=6, max_size=6), dims)
def test_heat_kernel_symmetric_positive(t, c, d):
    x, y = np.array(c[:d]), np.array(c[3:3 + d])
    a, b = K.heat_kernel(t, x, y, d), K.heat_kernel(t, y, x, d)
    assert a == b and a >= 0
    if np.sum((x - y) ** 2) / (2 * t) < 700:  # below that exp underflows in float64
        assert a > 0


@SETTINGS
@given(st.floats(0.05, 3.0), coords)
def test_heat_kernel_normalized_d1(t, x):
    from scipy import integrate
    s = math.sqrt(t)
    total = integrate.quad(lambda y: K.heat_kernel(t, x, y, 1), x - 12 * s, x + 12 * s, epsabs=1e-13)[0]
    assert abs(total - 1.0) < 1e-6


@SETTINGS
@given(times, times, coords, coords, st.floats(0.05, 2.0))
def test_semigroup_property_on_bumps(s, t, x, c, h):
    # P_s P_t phi = P_{s+t} phi; P_t of a bump is a wider bump
    bump = K.GaussianBump((c,), h)
    wider = K.GaussianBump((c,), h + t)
    a = K.semigroup_apply(s, wider, [x], 1)
    b = K.semigroup_apply(s + t, bump, [x], 1)
    assert math.isclose(a, b, rel_tol=1e-12)


@SETTINGS
@given(times, st.floats(0.0, 3.0), st.floats(0.1, 3.0))
def test_q_operator_linear_in_constant(t, x, c):
    a = K.q_operator(t, K.Constant(c), [x], 1)
    assert math.isclose(a, c * t, rel_tol=1e-14)


@SETTINGS
@given(st.floats(0.1, 4.0), st.floats(0.0, 0.9), dims, st.floats(0.05, 3.0), st.floats(0.05, 3.0))
def test_resolvent_decreasing_in_distance(alpha, eps, d, r1, r2):
    lo, hi = sorted((r1, r2))
    spec = K.ResolventSpec(alpha, tuple(np.zeros(d)), eps)
    y = lambda r: np.r_[r, np.zeros(d - 1)]
    assert K.resolvent(spec, y(lo), d) >= K.resolvent(spec, y(hi), d) > 0


@SETTINGS
@given(st.floats(0.1, 4.0), st.floats(1e-3, 1.0), dims, st.floats(0.05, 3.0))
def test_mollified_resolvent_dominated(alpha, eps, d, r):
    a = tuple(np.zeros(d))
    y = np.r_[r, np.zeros(d - 1)]
    ge = K.resolvent(K.ResolventSpec(alpha, a, eps), y, d)
    g = K.resolvent(K.ResolventSpec(alpha, a), y, d)
    assert ge <= math.exp(alpha) * g * (1 + 1e-9)


@SETTINGS
@given(st.floats(0.1, 3.0), st.floats(0.05, 1.0), st.floats(0.0, 3.0), st.sampled_from([1, 3]))
def test_resolvent_closed_form_matches_quadrature(alpha, eps, r, d):
    closed = K.resolvent(K.ResolventSpec(alpha, tuple(np.zeros(d)), eps), np.r_[r, np.zeros(d - 1)], d)
    assert abs(closed - K.resolvent_quadrature(alpha, eps, r, d)) <= 1e-6 * max(1.0, closed)


@SETTINGS
@given(st.lists(st.floats(-2, 2), min_size=1, max_size=20), st.floats(0.1, 2.0), st.floats(0.1, 2.0))
def test_occupation_linear_and_monotone(xs, a, b):
    acc = OccupationAccumulator(horizon=1.0, d=1)
    pos = np.array(xs)[:, None]
    for k in range(4):
        acc.add(0.25, P.ParticleCloud(0.25 * k, pos + 0.1 * k, 0.5))
    f, g = K.GaussianBump((0.0,), 0.3), K.GaussianBump((1.0,), 0.5)
    combo = a * acc.Y(f) + b * acc.Y(g)
    direct = sum(0.25 * 0.5 * (a * f(c.positions).sum() + b * g(c.positions).sum()) for _, _, c in acc.entries)
    assert math.isclose(combo, direct, rel_tol=1e-12, abs_tol=1e-300)
    series = [acc.Y(f, t) for t in (0.0, 0.3, 0.6, 1.0)]
    assert all(u <= v for u, v in zip(series, series[1:]))


@SETTINGS
@given(st.floats(-5, 5), st.floats(1e-3, 1), st.floats(-5, 5), st.floats(1e-3, 1))
def test_z_score_antisymmetric(e, se, o, so):
    assert math.isclose(z_score(e, se, o, so), -z_score(o, so, e, se), rel_tol=1e-12, abs_tol=1e-12)


@SETTINGS
@given(st.integers(0, 2**32), st.integers(0, 1000))
def test_replicate_rng_reproducible(seed, r):
    a = env.replicate_rng(seed, r).standard_normal(3)
    b = env.replicate_rng(seed, r).standard_normal(3)
    assert np.array_equal(a, b)


@SETTINGS
@given(st.lists(st.floats(-3, 3), min_size=2, max_size=12, unique=True), st.floats(0.2, 2.0))
def test_covariance_matrix_psd(xs, ell):
    G = env.covariance_matrix(env.GaussianKernel(1.0, ell), np.array(xs))
    assert np.allclose(G, G.T)
    assert np.linalg.eigvalsh(G).min() > -1e-10


@SETTINGS
@given(st.integers(1, 200), st.floats(0.01, 0.5))
def test_zero_field_never_clamps(n, m):
    cloud = P.ParticleCloud(0.0, np.zeros((n, 1)), m)
    stats = P.StepStats()
    out = P.step(cloud, env.Zero(), m, env.replicate_rng(0, n), stats)
    assert stats.n_clamped == 0 and out.count % 2 == 0 and out.count <= 2 * n
