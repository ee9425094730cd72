import math

import numpy as np
import pytest

from superocc import environment as env
from superocc import occupation as O
from superocc import particles as P
from superocc.errors import DomainError
from superocc.kernels import Constant as ConstFn, GaussianBump, heat_kernel, q_operator


def frozen(horizon=1.0, dt=0.01, **kw):
    cfg = P.SimConfig(d=1, mu=P.Dirac((0.0,)), kernel=env.Zero(), unit_mass=dt, horizon=horizon,
                      freeze_motion=True, freeze_branching=True, **kw)
    return P.run(cfg)


def live(seed=0, horizon=0.5, dt=0.01, kernel=None):
    cfg = P.SimConfig(d=1, mu=P.Dirac((0.0,)), kernel=kernel or env.Zero(), unit_mass=dt, horizon=horizon,
                      seed=seed)
    return P.run(cfg)


def test_zero_horizon_occupation_is_zero():
    acc = O.accumulate(frozen(horizon=0.0))
    assert acc.Y(ConstFn(1.0)) == 0.0
    field = O.density_field(acc, 0.0, 0.1, O.Grid.uniform(-1, 1, 5))
    assert np.all(field.values == 0)


def test_frozen_particle_occupation():
    acc = O.accumulate(frozen())
    bump = GaussianBump((0.0,), 0.5)
    assert acc.Y(bump) == pytest.approx(1.0 * bump(np.zeros((1, 1)))[0], rel=1e-12)
    field = O.density_field(acc, 1.0, 0.2, O.Grid.uniform(-1, 1, 5))
    expected = heat_kernel(0.2, 0.0, field.grid.nodes()[:, 0], 1)
    np.testing.assert_allclose(field.values, expected, rtol=1e-12)


def test_occupation_linear_and_monotone():
    acc = O.accumulate(live(seed=2))
    f, g = GaussianBump((0.0,), 0.3), GaussianBump((0.5,), 0.1)
    a = acc.Y(f) + 2.0 * acc.Y(g)
    m = 0.01
    direct = sum(w * m * (f(c.positions).sum() + 2 * g(c.positions).sum()) for _, w, c in acc.entries
                 if c.count)
    assert a == pytest.approx(direct, rel=1e-12)
    _, ys = acc.Y_series(ConstFn(1.0))
    assert np.all(np.diff(ys) >= 0)


def test_extinct_trajectory_gives_zero_density():
    acc = O.OccupationAccumulator(horizon=1.0, d=1)
    acc.add(0.1, P.ParticleCloud(0.0, np.zeros((0, 1)), 0.1))
    field = O.density_field(acc, 1.0, 0.1, O.Grid.uniform(-1, 1, 4))
    assert np.all(field.values == 0)


def test_density_rejects_dimension_four():
    with pytest.raises(DomainError, match="singular"):
        O.density_field(O.OccupationAccumulator(), 1.0, 0.1, O.Grid.uniform(-1, 1, 3, d=4))


def test_density_mass_consistency():
    traj = live(seed=5, horizon=0.5, dt=0.005)
    acc = O.accumulate(traj)
    grid = O.Grid.uniform(-8, 8, 801)
    field = O.density_field(acc, 0.5, 0.01, grid)
    total = acc.Y(ConstFn(1.0))
    assert field.mass() == pytest.approx(total, rel=0.02)


def test_density_recorder_matches_field():
    traj = live(seed=1, horizon=0.2)
    grid = O.Grid.uniform(-1, 1, 9)
    fields = O.density_series(traj, 0.05, grid, [0.1, 0.2])
    acc = O.accumulate(traj)
    for fld in fields:
        np.testing.assert_allclose(fld.values, O.density_field(acc, fld.t, 0.05, grid).values, rtol=1e-12)


def test_density_mean_matches_oracle():
    # Y_h(t, x) averaged over replicates against <delta_0, Q_t p_h^x>
    grid = O.Grid.uniform(-1, 1, 9)
    vals = []
    for r in range(150):
        cfg = P.SimConfig(d=1, mu=P.Dirac((0.0,)), kernel=env.Zero(), unit_mass=0.01, horizon=1.0)
        rec = O.DensityRecorder(grid, 0.05, 0.01, [1.0])
        P.run(cfg, env.replicate_rng(9, r), [rec], keep_snapshots=False)
        vals.append(rec.series()[0])
    vals = np.array(vals)
    mean, se = vals.mean(axis=0), vals.std(axis=0, ddof=1) / math.sqrt(len(vals))
    oracle = O.bump_oracle_grid((0.0,), 1.0, 0.05, grid)
    assert np.all(np.abs(mean - oracle) <= 3.5 * se)


def test_bump_oracle_matches_q_operator():
    grid = O.Grid.uniform(-1, 1, 5)
    oracle = O.bump_oracle_grid((0.0,), 0.7, 0.1, grid)
    for x, v in zip(grid.nodes()[:, 0], oracle):
        # <delta_0, Q_t p_h^x> = Q_t p_h^x (0); p_h^x is a bump centred at x of variance h
        bump = GaussianBump((x,), 0.1)
        assert v == pytest.approx(q_operator(0.7, bump, [0.0], 1), rel=1e-10)


def test_grid_csv_and_matrix(tmp_path):
    acc = O.accumulate(frozen(horizon=0.1))
    field = O.density_field(acc, 0.1, 0.1, O.Grid.uniform(-1, 1, 3, d=2))
    field.to_csv(tmp_path / "f.csv")
    field.to_matrix(tmp_path / "f.dat")
    rows = (tmp_path / "f.csv").read_text().splitlines()
    assert len(rows) == 1 + 9
    assert (tmp_path / "f.dat").read_text().strip()


def test_tanaka_frozen_particle():
    rep = O.tanaka_check(frozen(), (0.0,), 1.0, [0.1])
    assert rep["lhs"][0] == pytest.approx(heat_kernel(0.1, 0.0, 0.0, 1), rel=1e-12)
    assert rep["residual"][0] < 1e-12


def test_tanaka_identity_on_live_run():
    rep = O.tanaka_check(live(seed=3), (0.0,), 1.0)
    assert rep["residual_ok"]
    assert max(rep["residual"]) < 1e-10


def test_tanaka_needs_positive_eps():
    with pytest.raises(DomainError):
        O.TanakaRecorder((0.0,), 1.0, [0.0], 0.01, 1)


def test_tanaka_target_limit():
    assert O.tanaka_target(1.0, 0.0) == pytest.approx(math.sqrt(2 / math.pi))
    assert O.monotone_approach([0.5, 0.6, 0.7], 0.8)
    assert not O.monotone_approach([0.5, 0.75, 0.7], 0.8)


def test_green_rep_zero_horizon():
    rep = O.green_rep_check(frozen(horizon=0.0), (0.0,), 1.0)
    assert rep["residual"] == 0.0


def test_green_rep_frozen_is_zero_order():
    # a frozen particle has no martingale part, the residual is the Euler error only
    rep = O.green_rep_check(frozen(horizon=0.5, dt=0.005), (0.0,), 1.0)
    assert abs(rep["residual"]) < 0.05


def test_green_rep_terminal_mean():
    # E X_T(g_alpha^a) = <mu, P_T g_alpha^a> = g_{alpha,T}(0) for mu = delta_0
    from superocc.experiments import green_experiment
    base = P.SimConfig(d=1, mu=P.Dirac((0.0,)), kernel=env.Zero(), unit_mass=0.01, horizon=1.0, seed=13)
    rep = green_experiment(base, [0.01], 200, (0.0,), 1.0)
    row = rep["levels"][0]
    assert abs(row["mean_xT_g"] - row["x0_PTg"]) <= 3 * row["se_xT_g"]
