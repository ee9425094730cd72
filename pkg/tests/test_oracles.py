import math

import numpy as np
import pytest

from superocc import environment as env
from superocc import oracles as OR
from superocc.errors import ResolutionError
from superocc.kernels import Constant as ConstFn, GaussianBump, heat_kernel, q_operator
from superocc.occupation import Grid
from superocc.particles import Dirac, GaussianDensity, WeightedDiracs

ONE = ConstFn(1.0)
DELTA = Dirac((0.0,))


def test_first_moment_examples():
    assert OR.first_moment_X(DELTA, ONE, 3.0) == 1.0
    assert OR.first_moment_Y(DELTA, ONE, 3.0) == pytest.approx(3.0)
    assert OR.first_moment_Y(DELTA, ONE, 0.0) == 0.0
    bump = GaussianBump((1.0,), 0.5)
    assert OR.first_moment_X(DELTA, bump, 0.7) == pytest.approx(heat_kernel(1.2, 0.0, 1.0, 1), rel=1e-12)


def test_first_moment_gaussian_density_and_weights():
    bump = GaussianBump((0.5, 0.0), 0.2)
    mu = GaussianDensity((0.0, 0.0), 0.3, 2.0)
    expected = 2.0 * heat_kernel(0.2 + 0.3 + 0.4, [0.0, 0.0], [0.5, 0.0], 2)
    assert OR.first_moment_X(mu, bump, 0.4) == pytest.approx(expected, rel=1e-12)
    # Y for a density: int_0^t <mu, P_s phi> ds
    y = OR.first_moment_Y(mu, bump, 0.4)
    assert y == pytest.approx(2.0 * q_operator(0.4, GaussianBump((0.5, 0.0), 0.5), [0.0, 0.0], 2), rel=1e-10)
    wd = WeightedDiracs(((0.0,), (1.0,)), (0.25, 0.75))
    assert OR.first_moment_X(wd, GaussianBump((0.0,), 0.1), 1.0) == pytest.approx(
        0.25 * heat_kernel(1.1, 0.0, 0.0, 1) + 0.75 * heat_kernel(1.1, 1.0, 0.0, 1), rel=1e-12)


def test_zero_kernel_constant_function_exact():
    v, se = OR.second_moment_X(DELTA, ONE, ONE, 1.0, env.Zero(), 2000, rng=np.random.default_rng(0))
    assert v == pytest.approx(2.0, abs=1e-12)
    assert se == pytest.approx(0.0, abs=1e-12)


def test_zero_kernel_Y_second_moment():
    v, se = OR.second_moment_Y(DELTA, ONE, ONE, 1.0, env.Zero(), 20000, rng=np.random.default_rng(1))
    assert abs(v - 4.0 / 3.0) <= 3 * se + 1e-12


def test_zero_horizon_moments():
    x = OR.second_moments("X", DELTA, [(ONE, ONE)], 0.0, env.Constant(1.0), 10)[0]
    y = OR.second_moments("Y", DELTA, [(ONE, ONE)], 0.0, env.Constant(1.0), 10)[0]
    assert x.value == 1.0 and x.se == 0.0
    assert y.value == 0.0 and y.se == 0.0


def test_constant_kernel_closed_form():
    c, t = 0.5, 1.0
    closed = math.exp(c * t) + (math.exp(c * t) - 1) / c
    assert closed == pytest.approx(2.94616, abs=1e-5)
    semi = OR.constant_kernel_second_moment("X", DELTA, ONE, ONE, t, c)
    assert semi == pytest.approx(closed, rel=1e-10)
    v, se = OR.second_moment_X(DELTA, ONE, ONE, t, env.Constant(c), 20000, rng=np.random.default_rng(2))
    assert abs(v - closed) <= 3 * se


def test_constant_kernel_Y_constant_function():
    # E Y_t(1)^2 = 2 int_0^t int_0^u E X_r(1) X_u(1) dr du with E X_r X_u = E X_r^2 for r < u
    c, t = 0.5, 1.0
    def ex2(r):
        return math.exp(c * r) + (math.exp(c * r) - 1) / c
    from scipy import integrate
    closed = 2 * integrate.dblquad(lambda r, u: ex2(r), 0, t, 0, lambda u: u)[0]
    semi = OR.constant_kernel_second_moment("Y", DELTA, ONE, ONE, t, c)
    assert semi == pytest.approx(closed, rel=1e-8)


def test_semi_analytic_agrees_with_monte_carlo_for_bumps():
    bump = GaussianBump((0.0,), 0.5)
    for kind in ("X", "Y"):
        semi = OR.constant_kernel_second_moment(kind, DELTA, bump, ONE, 1.0, 0.5)
        est = OR.second_moments(kind, DELTA, [(bump, ONE)], 1.0, env.Constant(0.5), 16384,
                                rng=np.random.default_rng(3))[0]
        assert abs(est.value - semi) <= 3 * est.se


def test_zero_kernel_unit_weight_identical():
    bump = GaussianBump((0.2,), 0.3)
    a = OR.second_moments("X", DELTA, [(bump, bump)], 1.0, env.Zero(), 4096, rng=np.random.default_rng(4))[0]
    b = OR.second_moments("X", DELTA, [(bump, bump)], 1.0, env.Zero(), 4096, rng=np.random.default_rng(4),
                          unit_weight=True)[0]
    assert a.value == b.value


def test_swapping_functions_symmetric_in_law():
    # the two paths are exchangeable, so swapping phi and psi changes only the noise
    f, g = GaussianBump((0.0,), 0.5), GaussianBump((1.0,), 0.2)
    k = env.GaussianKernel(0.5, 1.0)
    a, b = OR.second_moments("Y", DELTA, [(f, g), (g, f)], 1.0, k, 4096, rng=np.random.default_rng(5))
    assert abs(a.value - b.value) <= 3 * math.hypot(a.se, b.se)


def test_monotone_in_constant():
    bump = GaussianBump((0.0,), 0.5)
    vals = [OR.constant_kernel_second_moment("X", DELTA, bump, bump, 1.0, c) for c in (0.0, 0.5, 1.0)]
    assert vals[0] < vals[1] < vals[2]


def test_se_halves_with_four_times_paths():
    bump = GaussianBump((0.0,), 0.5)
    k = env.Constant(0.5)
    s1 = OR.second_moments("X", DELTA, [(bump, bump)], 1.0, k, 8192, rng=np.random.default_rng(6))[0].se
    s2 = OR.second_moments("X", DELTA, [(bump, bump)], 1.0, k, 32768, rng=np.random.default_rng(7))[0].se
    assert s1 / s2 == pytest.approx(2.0, rel=0.2)


def test_z_score_rules():
    assert OR.z_score(1.0, 0.0, 1.0 + 1e-15, 0.0) == 0.0
    assert OR.z_score(1.0, 0.0, 1.1, 0.0) == -math.inf
    assert OR.z_score(1.0, 0.3, 0.0, 0.4) == pytest.approx(2.0)
    r = OR.MomentReport("x", 1.0, 0.1, 1.5)
    assert not r.passed and r.z == pytest.approx(-5.0)


def test_report_writers(tmp_path):
    reps = [OR.MomentReport("E X(1)", 1.0, 0.1, 1.0)]
    OR.write_reports_json(reps, tmp_path / "r.json")
    OR.write_reports_csv(reps, tmp_path / "r.csv")
    assert "E X(1)" in (tmp_path / "r.csv").read_text()


# -- V_1 ----------------------------------------------------------------------


def test_v1_zero_kernel_is_mean():
    grid = Grid.uniform(-2, 2, 41)
    bump = GaussianBump((0.0,), 0.5)
    v = OR.v1_field(bump, env.Zero(), 1.0, grid, dt=0.01)
    expected = [q_operator(1.0, bump, [x], 1) for x in grid.nodes()[:, 0]]
    np.testing.assert_allclose(v, expected, rtol=1e-10)


def test_v1_zero_time():
    grid = Grid.uniform(-1, 1, 5)
    assert np.all(OR.v1_field(ONE, env.Constant(1.0), 0.0, grid, dt=0.01) == 0)


def test_v1_mean_over_noise():
    grid = Grid.uniform(-3, 3, 31)
    bump = GaussianBump((0.0,), 0.5)
    k = env.GaussianKernel(0.5, 1.0)
    draws = np.array([OR.v1_field(bump, k, 0.5, grid, dt=0.04, rng=np.random.default_rng(r)) for r in range(200)])
    mean, se = draws.mean(axis=0), draws.std(axis=0, ddof=1) / math.sqrt(200)
    oracle = np.array([q_operator(0.5, bump, [x], 1) for x in grid.nodes()[:, 0]])
    inner = slice(10, 21)
    assert np.all(np.abs(mean[inner] - oracle[inner]) <= 3.5 * se[inner] + 1e-12)


def test_v1_resolution_errors():
    grid = Grid.uniform(-1, 1, 201)
    with pytest.raises(ResolutionError):
        OR.v1_field(GaussianBump((0.0,), 1e-6), env.Constant(1.0), 1.0, grid, dt=0.01)
    with pytest.raises(ResolutionError):
        OR.v1_field(ONE, env.Constant(1.0), 1.0, grid, dt=1e-6)
