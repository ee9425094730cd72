"""Seeded replicate ensembles and the experiment drivers behind the CLI.

Replicate r of an ensemble with master seed s draws every random number from
``environment.replicate_rng(s, r)``; results are returned sorted by r, so the
output does not depend on the thread count.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import environment as env
from . import oracles
from .kernels import Constant
from .occupation import (DEFAULT_EPS, DensityRecorder, GreenRepRecorder, Grid, TanakaRecorder,
                         monotone_approach, tanaka_target)
from .oracles import MomentReport
from .particles import FunctionalRecorder, SimConfig, martingale_from_series, run
from .regularity import bandwidth_for_lags, calibrate, geometric_offsets, spatial_exponent, temporal_exponent


def run_replicates(config: SimConfig, n_replicates: int, make_observers: Callable[[int], list],
                   summarize: Callable, threads: int = 1, first_index: int = 0) -> list:
    """summarize(trajectory, observers) for each replicate, ordered by index."""

    def one(r: int):
        obs = make_observers(r)
        traj = run(config, env.replicate_rng(config.seed, r), obs, keep_snapshots=False)
        return summarize(traj, obs)

    idx = range(first_index, first_index + n_replicates)
    if threads <= 1:
        return [one(r) for r in idx]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, idx))


def mean_se(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return float(v.mean()) if v.size else math.nan, 0.0
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


# ---------------------------------------------------------------------------
# moment ensembles


@dataclass
class MomentEnsemble:
    config: SimConfig
    phis: list
    X_T: np.ndarray  # (n_rep, n_phi)
    Y_T: np.ndarray  # (n_rep, n_phi)
    M_T: np.ndarray  # (n_rep,) M_T(1)
    qv_discrete: np.ndarray  # (n_rep,)
    qv_plugin: np.ndarray  # (n_rep,)
    clamp_fraction: np.ndarray  # (n_rep,)
    extras: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.X_T.shape[0]


def moment_ensemble(config: SimConfig, n_replicates: int, phis: Sequence, threads: int = 1,
                    extra_observers: Callable[[int], list] | None = None,
                    extra_summary: Callable | None = None, with_qv: bool = True) -> MomentEnsemble:
    """X_T(phi), Y_T(phi), M_T(1) and its quadratic variation per replicate.

    ``with_qv=False`` skips the plug-in QV (its g-term costs a kernel factor per step).
    """
    n_steps = config.n_steps
    dt = config.dt

    def make(r):
        obs = [FunctionalRecorder(Constant(1.0), config.kernel, n_steps, with_qv=with_qv)]
        obs += [FunctionalRecorder(p, config.kernel, n_steps, with_qv=False) for p in phis]
        if extra_observers is not None:
            obs += extra_observers(r)
        return obs

    def summarize(traj, obs):
        one = obs[0]
        mt = martingale_from_series(one.x_phi, one.x_lap, one.x_phi2, one.g_term, dt)
        recs = obs[1:1 + len(phis)]
        xs = [rec.x_phi[-1] for rec in recs]
        ys = [dt * rec.x_phi[:-1].sum() for rec in recs]
        extra = extra_summary(traj, obs[1 + len(phis):]) if extra_summary else None
        return xs, ys, mt.M[-1], mt.qv_discrete[-1], mt.qv_plugin[-1], traj.clamp_fraction, extra

    rows = run_replicates(config, n_replicates, make, summarize, threads)
    return MomentEnsemble(
        config, list(phis),
        np.array([r[0] for r in rows]).reshape(n_replicates, len(phis)),
        np.array([r[1] for r in rows]).reshape(n_replicates, len(phis)),
        np.array([r[2] for r in rows]), np.array([r[3] for r in rows]),
        np.array([r[4] for r in rows]), np.array([r[5] for r in rows]),
        [r[6] for r in rows])


def fn_label(phi) -> str:
    if isinstance(phi, Constant):
        return "1" if phi.c == 1 else f"{phi.c!r}"
    return f"p_{phi.h!r}^{list(phi.center)}"


def first_moment_reports(ens: MomentEnsemble) -> list:
    cfg = ens.config
    out = []
    for i, phi in enumerate(ens.phis):
        est, se = mean_se(ens.X_T[:, i])
        out.append(MomentReport(f"E X_T({fn_label(phi)}) = <mu,P_T phi>", est, se,
                                oracles.first_moment_X(cfg.mu, phi, cfg.horizon), 0.0, ens.n))
        est, se = mean_se(ens.Y_T[:, i])
        out.append(MomentReport(f"E Y_T({fn_label(phi)}) = <mu,Q_T phi>", est, se,
                                oracles.first_moment_Y(cfg.mu, phi, cfg.horizon), 0.0, ens.n))
    return out


def second_moment_reports(ens: MomentEnsemble, n_paths: int, seed: int, dt_fk: float | None = None,
                          with_semi_analytic: bool = True) -> list:
    """Simulator E[X_T(phi)^2], E[Y_T(phi)^2] against the Feynman-Kac oracle."""
    cfg = ens.config
    pairs = [(p, p) for p in ens.phis]
    out = []
    for j, kind in enumerate(("X", "Y")):
        rng = env.replicate_rng(seed, 10**6 + j)
        ests = oracles.second_moments(kind, cfg.mu, pairs, cfg.horizon, cfg.kernel, n_paths, dt_fk, rng)
        data = ens.X_T if kind == "X" else ens.Y_T
        for i, phi in enumerate(ens.phis):
            est, se = mean_se(data[:, i] ** 2)
            out.append(MomentReport(f"E {kind}_T({fn_label(phi)})^2 vs Feynman-Kac", est, se,
                                    ests[i].value, ests[i].se, ens.n, n_paths))
            if with_semi_analytic and isinstance(cfg.kernel, (env.Constant, env.Zero)):
                c = cfg.kernel.c if isinstance(cfg.kernel, env.Constant) else 0.0
                sa = oracles.constant_kernel_second_moment(kind, cfg.mu, phi, phi, cfg.horizon, c)
                out.append(MomentReport(f"E {kind}_T({fn_label(phi)})^2 vs semi-analytic", est, se,
                                        sa, 0.0, ens.n))
    return out


def qv_summary(ens: MomentEnsemble) -> dict:
    """Replicate variance of M_T(1) against the replicate means of both QV estimates."""
    var = float(np.var(ens.M_T, ddof=1))
    plug = float(ens.qv_plugin.mean())
    disc = float(ens.qv_discrete.mean())
    return {
        "var_M": var,
        "mean_M": float(ens.M_T.mean()),
        "se_mean_M": float(ens.M_T.std(ddof=1) / math.sqrt(ens.n)),
        "qv_plugin_mean": plug,
        "qv_discrete_mean": disc,
        "rel_diff_plugin": abs(var - plug) / plug,
        "rel_diff_discrete": abs(var - disc) / disc,
        "n_replicates": ens.n,
        "clamp_fraction_max": float(ens.clamp_fraction.max()),
    }


# ---------------------------------------------------------------------------
# Tanaka and Green representation


def tanaka_experiment(config: SimConfig, n_replicates: int, a, alpha: float,
                      eps_list: Sequence[float] = DEFAULT_EPS, threads: int = 1) -> dict:
    def make(r):
        return [TanakaRecorder(a, alpha, eps_list, config.dt, config.d)]

    reports = run_replicates(config, n_replicates, make, lambda tr, obs: obs[0].report(), threads)
    return tanaka_summary(reports, config, a, eps_list)


def tanaka_summary(reports: list, config: SimConfig, a, eps_list) -> dict:
    lhs = np.array([r["lhs"] for r in reports])
    resid = np.array([r["residual"] for r in reports])
    means = lhs.mean(axis=0)
    ses = lhs.std(axis=0, ddof=1) / math.sqrt(len(reports)) if len(reports) > 1 else np.zeros_like(means)
    out = {
        "eps": list(eps_list),
        "mean_lhs": means.tolist(),
        "se_lhs": ses.tolist(),
        "max_residual": float(resid.max()),
        "residual_bound": 5 * config.dt,
        "residual_ok": bool(resid.max() <= 5 * config.dt),
        "n_replicates": len(reports),
    }
    origin = np.allclose(np.asarray(a, dtype=float), 0.0)
    if config.d == 1 and origin and getattr(config.mu, "point", None) == (0.0,) and config.mu.mass == 1.0:
        targets = [tanaka_target(config.horizon, e) for e in eps_list]
        limit = tanaka_target(config.horizon, 0.0)
        out["eps_targets"] = targets
        out["eps0_target"] = limit
        out["gaps_to_eps0"] = [abs(m - limit) for m in means]
        out["monotone"] = monotone_approach(means, limit)
    return out


def green_experiment(base: SimConfig, dt_levels: Sequence[float], n_replicates: int, a, alpha: float,
                     threads: int = 1) -> dict:
    """RMS residual of the Green representation at each dt (= unit mass)."""
    rows = []
    for dt in dt_levels:
        cfg = replace(base, unit_mass=dt)

        def make(r, cfg=cfg):
            return [GreenRepRecorder(a, alpha, cfg.horizon, cfg.dt, cfg.d)]

        reps = run_replicates(cfg, n_replicates, make, lambda tr, obs: obs[0].report(), threads)
        res = np.array([r["residual"] for r in reps])
        xT = np.array([r["xT_g"] for r in reps])
        x0 = reps[0]["x0_PTg"]
        rows.append({
            "dt": dt,
            "rms_residual": float(np.sqrt((res**2).mean())),
            "mean_residual": float(res.mean()),
            "mean_xT_g": float(xT.mean()),
            "se_xT_g": float(xT.std(ddof=1) / math.sqrt(len(xT))) if len(xT) > 1 else 0.0,
            "x0_PTg": float(x0),
        })
    ratios = [rows[i]["rms_residual"] / rows[i + 1]["rms_residual"] for i in range(len(rows) - 1)]
    return {"levels": rows, "ratios": ratios, "n_replicates": n_replicates}


# ---------------------------------------------------------------------------
# Hölder exponents


def holder_experiment(config: SimConfig, n_replicates: int, grid: Grid, record_dt: float,
                      t_eval: float | None = None, t_min: float = 0.5, n_lags: int = 6,
                      max_space_offset: int = 16, max_time_offset: int = 20,
                      threads: int = 1, seed_calibration: int = 0) -> dict:
    """Calibration gate, then spatial and temporal structure-function fits."""
    cal = calibrate(seed_calibration, n_nodes=grid.shape[0])
    out = {"calibration": cal}
    if not cal["passed"]:
        out["gated"] = True
        return out
    step = grid.step[0]
    h = bandwidth_for_lags(step)
    n_rec = int(round(config.horizon / record_dt))
    times = [k * record_dt for k in range(n_rec + 1)]

    def make(r):
        return [DensityRecorder(grid, h, config.dt, times)]

    series = np.array(run_replicates(config, n_replicates, make, lambda tr, obs: obs[0].series(), threads))
    t_eval = config.horizon if t_eval is None else t_eval
    j = int(round(t_eval / record_dt))
    space_lags = [k * step for k in geometric_offsets(max_space_offset, n_lags)]
    time_lags = [k * record_dt for k in geometric_offsets(max_time_offset, n_lags)]
    fs = spatial_exponent(series[:, j], space_lags, step)
    ft = temporal_exponent(series, times, time_lags, t_min=t_min)
    out.update({
        "gated": False,
        "bandwidth_h": h,
        "n_replicates": n_replicates,
        "spatial": fs.to_dict(),
        "temporal": ft.to_dict(),
    })
    return out


def environment_covariance_check(kernel, positions, dt: float, n_draws: int, seed: int) -> dict:
    """Empirical covariance of increments vs dt*G, and cross-step covariance vs 0."""
    rng = env.replicate_rng(seed, 0)
    pos = np.asarray(positions, dtype=float).reshape(len(positions), -1)
    a = np.empty((n_draws, pos.shape[0]))
    b = np.empty_like(a)
    for i in range(n_draws):
        a[i] = env.sample_increment(kernel, pos, dt, rng).values
        b[i] = env.sample_increment(kernel, pos, dt, rng).values
    G = dt * env.covariance_matrix(kernel, pos)
    emp = np.cov(a, rowvar=False, ddof=1)
    var = np.outer(np.diag(G), np.diag(G)) + G * G
    se = np.sqrt(var / n_draws)
    cross = (a - a.mean(0)).T @ (b - b.mean(0)) / (n_draws - 1)
    se_cross = np.sqrt(np.outer(np.diag(G), np.diag(G)) / n_draws)
    z_cov = np.abs(emp - G) / se
    z_cross = np.abs(cross) / se_cross
    z_mean = np.abs(a.mean(0)) / np.sqrt(np.diag(G) / n_draws)
    return {
        "G_dt": G.tolist(), "empirical": emp.tolist(), "cross": cross.tolist(),
        "max_z_cov": float(z_cov.max()), "max_z_cross": float(z_cross.max()), "max_z_mean": float(z_mean.max()),
        "passed": bool(z_cov.max() <= 4 and z_cross.max() <= 4),
    }
