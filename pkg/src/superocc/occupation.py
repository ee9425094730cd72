"""Occupation measure Y_t, its mollified density, and the Tanaka / Green checks.

Time integrals are left-Riemann sums over the trajectory grid:
Y_t(phi) = sum_{t_k < t} dt * X_{t_k}(phi).

Each check exists in two forms: a recorder (an observer passed to
``particles.run``, so ensembles need not keep snapshots) and a function that
replays the stored snapshots of a trajectory through the same recorder.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _backend
from .errors import DomainError
from .kernels import ResolventSpec, check_dim, heat_density, resolvent_values
from .particles import ParticleCloud, Trajectory, evaluate

DEFAULT_EPS = (0.2, 0.05, 0.0125)
DENSITY_CUTOFF = 9.0


def _require_density_dim(d: int) -> None:
    if d >= 4:
        raise DomainError(
            f"d={d}: the occupation measure Y_t is singular with respect to Lebesgue measure "
            "for d >= 4, so no occupation density exists")
    check_dim(d)


# ---------------------------------------------------------------------------
# occupation measure


@dataclass
class OccupationAccumulator:
    """Y_t as a list of (time weight, cloud) pairs, one per left-Riemann node."""

    entries: list = field(default_factory=list)  # [(t_k, weight dt, ParticleCloud)]
    horizon: float = 0.0
    d: int = 1

    def add(self, weight: float, cloud: ParticleCloud) -> None:
        self.entries.append((cloud.time, weight, cloud))

    def Y(self, phi, t: float | None = None) -> float:
        """Y_t(phi); t defaults to the horizon."""
        t = self.horizon if t is None else t
        total = 0.0
        for tk, w, cloud in self.entries:
            if tk < t - 1e-12:
                vals, _ = evaluate(phi, cloud.positions)
                total += w * cloud.unit_mass * float(vals.sum())
        return total

    def Y_series(self, phi) -> tuple[np.ndarray, np.ndarray]:
        """(times, Y_t(phi)) at every node time and the horizon, Y_0 = 0."""
        times = [0.0]
        vals = [0.0]
        acc = 0.0
        for tk, w, cloud in self.entries:
            v, _ = evaluate(phi, cloud.positions)
            acc += w * cloud.unit_mass * float(v.sum())
            times.append(tk + w)
            vals.append(acc)
        return np.array(times), np.array(vals)


def accumulate(trajectory: Trajectory) -> OccupationAccumulator:
    """Left-Riemann occupation measure from the stored snapshots."""
    acc = OccupationAccumulator(horizon=trajectory.config.horizon, d=trajectory.config.d)
    snaps = trajectory.snapshots
    for k in range(len(snaps) - 1):
        acc.add(snaps[k + 1].time - snaps[k].time, snaps[k])
    return acc


# ---------------------------------------------------------------------------
# density fields


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid: node j along axis c sits at origin[c] + j * step[c]."""

    origin: tuple
    step: tuple
    shape: tuple

    def __post_init__(self):
        object.__setattr__(self, "origin", tuple(float(v) for v in np.atleast_1d(self.origin)))
        object.__setattr__(self, "step", tuple(float(v) for v in np.atleast_1d(self.step)))
        object.__setattr__(self, "shape", tuple(int(v) for v in np.atleast_1d(self.shape)))
        if not len(self.origin) == len(self.step) == len(self.shape):
            raise DomainError("grid origin, step and shape must have one entry per axis")
        if any(s <= 0 for s in self.step) or any(n < 1 for n in self.shape):
            raise DomainError("grid steps must be > 0 and shapes >= 1")

    @classmethod
    def uniform(cls, lo, hi, n: int, d: int = 1) -> "Grid":
        lo = np.broadcast_to(np.asarray(lo, dtype=float), (d,))
        hi = np.broadcast_to(np.asarray(hi, dtype=float), (d,))
        step = (hi - lo) / (n - 1)
        return cls(tuple(lo), tuple(step), (n,) * d)

    @property
    def d(self) -> int:
        return len(self.shape)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.step))

    def axes(self) -> list:
        return [o + s * np.arange(n) for o, s, n in zip(self.origin, self.step, self.shape)]

    def nodes(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)


def _accumulate_cloud(out: np.ndarray, grid: Grid, cloud: ParticleCloud, weight: float, h: float) -> None:
    if cloud.count == 0:
        return
    _backend.density_accumulate(
        np.ascontiguousarray(cloud.positions, dtype=float), weight * cloud.unit_mass, h,
        np.asarray(grid.origin), np.asarray(grid.step), np.asarray(grid.shape, dtype=np.int_),
        out, DENSITY_CUTOFF)


@dataclass
class DensityField:
    grid: Grid
    t: float
    h: float
    values: np.ndarray  # shape grid.shape

    def mass(self) -> float:
        return float(self.values.sum() * self.grid.cell_volume)

    def to_csv(self, path) -> None:
        nodes = self.grid.nodes()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{i + 1}" for i in range(self.grid.d)] + ["value"])
            for x, v in zip(nodes, self.values.reshape(-1)):
                w.writerow([repr(float(c)) for c in x] + [repr(float(v))])

    def to_matrix(self, path) -> None:
        """Plain-text matrix readable by gnuplot.

        d=1: "x value" lines. d=2: ``nonuniform matrix`` layout with the x2
        axis in the first row and x1 in the first column. d=3: one d=2 block per
        x3 slice, blocks separated by two blank lines (gnuplot ``index``).
        """
        axes = self.grid.axes()
        with open(path, "w") as fh:
            fh.write(f"# t={self.t!r} h={self.h!r}\n")
            if self.grid.d == 1:
                for x, v in zip(axes[0], self.values):
                    fh.write(f"{x!r} {float(v)!r}\n")
                return
            blocks = [self.values] if self.grid.d == 2 else [self.values[:, :, k] for k in range(self.grid.shape[2])]
            for b, block in enumerate(blocks):
                if self.grid.d == 3:
                    fh.write(f"# x3={axes[2][b]!r}\n")
                fh.write(" ".join([str(len(axes[1]))] + [repr(float(y)) for y in axes[1]]) + "\n")
                for x, row in zip(axes[0], block):
                    fh.write(" ".join([repr(float(x))] + [repr(float(v)) for v in row]) + "\n")
                fh.write("\n\n")


def density_field(acc: OccupationAccumulator, t: float, h: float, grid: Grid) -> DensityField:
    """Y_h(t, x) = sum_{t_k < t} dt * m * sum_i p_h(x, x_i) at the grid nodes."""
    _require_density_dim(grid.d)
    if not h > 0:
        raise DomainError("bandwidth h must be > 0")
    out = np.zeros(int(np.prod(grid.shape)))
    for tk, w, cloud in acc.entries:
        if tk < t - 1e-12:
            _accumulate_cloud(out, grid, cloud, w, h)
    return DensityField(grid, t, h, out.reshape(grid.shape))


class DensityRecorder:
    """Observer building Y_h(t, .) on a grid at a set of record times.

    Record time t_j receives the sum over steps t_k < t_j, so every record
    time should lie on the step grid.
    """

    def __init__(self, grid: Grid, h: float, dt: float, record_times: Sequence[float]):
        _require_density_dim(grid.d)
        if not h > 0:
            raise DomainError("bandwidth h must be > 0")
        self.grid, self.h, self.dt = grid, h, dt
        self.record_steps = sorted({int(round(t / dt)) for t in record_times})
        self.record_times = [k * dt for k in self.record_steps]
        self._running = np.zeros(int(np.prod(grid.shape)))
        self.frames: list = []

    def __call__(self, k: int, cloud: ParticleCloud) -> None:
        if k in self.record_steps:
            self.frames.append(self._running.reshape(self.grid.shape).copy())
        _accumulate_cloud(self._running, self.grid, cloud, self.dt, self.h)

    def fields(self) -> list:
        return [DensityField(self.grid, t, self.h, v) for t, v in zip(self.record_times, self.frames)]

    def series(self) -> np.ndarray:
        """Array of shape (n_times, *grid.shape)."""
        return np.array(self.frames)


def density_series(trajectory: Trajectory, h: float, grid: Grid, times: Sequence[float]) -> list:
    """Y_h(t, .) for several t in one pass over the snapshots."""
    rec = DensityRecorder(grid, h, trajectory.snapshot_dt(), times)
    for k, cloud in enumerate(trajectory.snapshots):
        rec(k, cloud)
    return rec.fields()


# ---------------------------------------------------------------------------
# Tanaka formula


class TanakaRecorder:
    """Per-step X(p_eps^a) and X(g_{alpha,eps}^a) for every eps."""

    def __init__(self, a, alpha: float, eps_list: Sequence[float], dt: float, d: int):
        self.a = tuple(float(c) for c in np.atleast_1d(a))
        if len(self.a) != d:
            raise DomainError("point a has the wrong dimension")
        self.specs = [ResolventSpec(alpha, self.a, e) for e in eps_list]
        for s in self.specs:
            s.validate(d)
            if not s.eps > 0:
                raise DomainError("Tanaka check needs eps > 0")
        self.alpha, self.eps, self.dt, self.d = alpha, tuple(eps_list), dt, d
        self.x_p: list = []
        self.x_g: list = []

    def __call__(self, k: int, cloud: ParticleCloud) -> None:
        if cloud.count == 0:
            self.x_p.append(np.zeros(len(self.eps)))
            self.x_g.append(np.zeros(len(self.eps)))
            return
        pos = cloud.positions
        r2 = ((pos - np.asarray(self.a)) ** 2).sum(axis=1)
        m = cloud.unit_mass
        self.x_p.append(np.array([m * heat_density(e, r2, self.d).sum() for e in self.eps]))
        self.x_g.append(np.array([m * resolvent_values(s, pos).sum() for s in self.specs]))

    def report(self) -> dict:
        xp = np.array(self.x_p)
        xg = np.array(self.x_g)
        dt, alpha = self.dt, self.alpha
        lhs = dt * xp[:-1].sum(axis=0)
        drift = alpha * dt * xg[:-1].sum(axis=0)
        # martingale term from M_T = X_T(g) - X_0(g) - sum dt X((Delta/2) g),
        # (Delta/2) g_{alpha,eps} = alpha g_{alpha,eps} - p_eps
        lap = dt * (alpha * xg[:-1] - xp[:-1]).sum(axis=0)
        mart = xg[-1] - xg[0] - lap
        rhs = xg[0] - xg[-1] + drift + mart
        resid = np.abs(lhs - rhs)
        gaps = np.abs(np.diff(lhs))
        return {
            "eps": list(self.eps),
            "lhs": lhs.tolist(),
            "rhs": rhs.tolist(),
            "residual": resid.tolist(),
            "x0_g": xg[0].tolist(),
            "xT_g": xg[-1].tolist(),
            "drift": drift.tolist(),
            "martingale": mart.tolist(),
            "successive_gaps": gaps.tolist(),
            "dt": dt,
            "residual_ok": bool(np.all(resid <= 5 * dt)),
        }


def tanaka_check(trajectory: Trajectory, a, alpha: float, eps_list: Sequence[float] = DEFAULT_EPS) -> dict:
    rec = TanakaRecorder(a, alpha, eps_list, trajectory.snapshot_dt(), trajectory.config.d)
    for k, cloud in enumerate(trajectory.snapshots):
        rec(k, cloud)
    return rec.report()


def tanaka_target(t: float, eps: float) -> float:
    """int_0^t p_{s+eps}(0,0) ds in d=1, i.e. E Y_t(p_eps^0) for mu = delta_0."""
    return math.sqrt(2.0 / math.pi) * (math.sqrt(t + eps) - math.sqrt(eps))


def monotone_approach(means: Sequence[float], target: float) -> bool:
    gaps = [abs(m - target) for m in means]
    return all(gaps[i + 1] < gaps[i] for i in range(len(gaps) - 1))


# ---------------------------------------------------------------------------
# Green function representation


class GreenRepRecorder:
    """Residual of X_T(g) = X_0(P_T g) + sum_k dM_k(P_{T-t_k} g) on the step grid.

    With psi_k = P_{T - t_k} g_alpha^a = g_{alpha, T - t_k}^a, and
    dM_k(psi) = X_{k+1}(psi) - X_k(psi) - dt X_k((Delta/2) psi), where
    (Delta/2) g_{alpha,s} = alpha g_{alpha,s} - p_s^a.
    """

    def __init__(self, a, alpha: float, horizon: float, dt: float, d: int):
        self.a = tuple(float(c) for c in np.atleast_1d(a))
        self.alpha, self.T, self.dt, self.d = alpha, horizon, dt, d
        self.n_steps = int(round(horizon / dt))
        ResolventSpec(alpha, self.a, 0.0).validate(d)
        self.x0 = 0.0
        self.xT = 0.0
        self.sum_dm = 0.0
        self._pending = 0.0  # -X_k(psi_k) - dt X_k((Delta/2) psi_k) awaiting X_{k+1}(psi_k)

    def _spec(self, k: int) -> ResolventSpec:
        return ResolventSpec(self.alpha, self.a, max(self.T - k * self.dt, 0.0))

    def _x(self, cloud, spec):
        if cloud.count == 0:
            return 0.0
        return cloud.unit_mass * float(resolvent_values(spec, cloud.positions).sum())

    def __call__(self, k: int, cloud: ParticleCloud) -> None:
        if k > 0:
            self.sum_dm += self._x(cloud, self._spec(k - 1)) + self._pending
        if k == self.n_steps:
            self.xT = self._x(cloud, self._spec(k))
            if k == 0:
                self.x0 = self.xT
            return
        spec = self._spec(k)
        xk = self._x(cloud, spec)
        if k == 0:
            self.x0 = xk
        lap = 0.0
        if cloud.count:
            r2 = ((cloud.positions - np.asarray(self.a)) ** 2).sum(axis=1)
            lap = self.alpha * xk - cloud.unit_mass * float(heat_density(spec.eps, r2, self.d).sum())
        self._pending = -xk - self.dt * lap

    def report(self) -> dict:
        resid = self.xT - self.x0 - self.sum_dm
        return {"dt": self.dt, "xT_g": self.xT, "x0_PTg": self.x0, "sum_dM": self.sum_dm, "residual": resid}


def green_rep_check(trajectory: Trajectory, a, alpha: float) -> dict:
    cfg = trajectory.config
    rec = GreenRepRecorder(a, alpha, cfg.horizon, trajectory.snapshot_dt(), cfg.d)
    for k, cloud in enumerate(trajectory.snapshots):
        rec(k, cloud)
    return rec.report()


def bump_oracle_grid(mu_point, t: float, h: float, grid: Grid) -> np.ndarray:
    """<delta_x0, Q_t p_h^x> at every node, the mean of Y_h(t, x) for mu = delta_x0."""
    from .kernels import gaussian_time_integral

    nodes = grid.nodes()
    r = np.sqrt(((nodes - np.asarray(mu_point, dtype=float)) ** 2).sum(axis=1))
    return gaussian_time_integral(h, t + h, r, grid.d).reshape(grid.shape)
