"""Independent evaluations of the first and second moment formulas.

First moments are deterministic: E X_t(phi) = <mu, P_t phi> and
E Y_t(phi) = <mu, Q_t phi>.

Second moments use the Feynman-Kac representation over pairs of independent
Brownian motions (B, B~) weighted by exp(int_0^s g(B_u, B~_u) du):

    E[X_t(phi) X_t(psi)] = <mu x mu, Vt_t> + int_0^t ds <mu, P_{t-s} diag Vt_s>
    Vt_s(x, y) = E[exp(int_0^s g(B, B~)) phi(B_s) psi(B~_s)]

and the same with V_s(x, y) = E int_0^s [phi(B_u) Q_{s-u} psi(B~_u)
+ psi(B~_u) Q_{s-u} phi(B_u)] exp(int_0^u g(B, B~)) du for Y. The second
term is estimated by drawing the branch time uniformly (weight t) and the
branch point from p_{t-s}(x, .).
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import environment as env
from .errors import DomainError, ResolutionError, UnsupportedFunctionError
from .kernels import (Constant, GaussianBump, gaussian_time_integral, heat_density, q_operator,
                      semigroup_apply)
from .occupation import Grid
from .particles import GaussianDensity, InitialMeasure, measure_dim

DEFAULT_CHUNK = 4096


# ---------------------------------------------------------------------------
# reports


@dataclass
class MomentReport:
    identity: str
    estimate: float
    se_estimate: float
    oracle: float
    se_oracle: float = 0.0
    n_replicates: int = 0
    n_paths: int = 0
    z: float = field(init=False)
    threshold: float = 4.0
    failed: bool = False
    note: str = ""

    def __post_init__(self):
        self.z = z_score(self.estimate, self.se_estimate, self.oracle, self.se_oracle)

    @property
    def passed(self) -> bool:
        return (not self.failed) and abs(self.z) <= self.threshold

    def to_dict(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        return out


def z_score(est: float, se_est: float, oracle: float, se_oracle: float) -> float:
    """(est - oracle) / sqrt(se_est^2 + se_oracle^2).

    With both errors zero the sides are deterministic: z is 0 when they agree
    to float rounding (relative 1e-12) and infinite otherwise.
    """
    se = math.hypot(se_est, se_oracle)
    diff = est - oracle
    if se == 0.0:
        if abs(diff) <= 1e-12 * max(abs(est), abs(oracle), 1e-300):
            return 0.0
        return math.copysign(math.inf, diff)
    return diff / se


def write_reports_json(reports: Sequence[MomentReport], path) -> None:
    with open(path, "w") as fh:
        json.dump([r.to_dict() for r in reports], fh, indent=2)


def write_reports_csv(reports: Sequence[MomentReport], path) -> None:
    cols = ["identity", "estimate", "se_estimate", "oracle", "se_oracle", "z", "n_replicates", "n_paths", "passed"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in reports:
            d = r.to_dict()
            w.writerow([repr(d[c]) if isinstance(d[c], float) else d[c] for c in cols])


# ---------------------------------------------------------------------------
# measures as (point, mass, extra variance) atoms


def _atoms(mu: InitialMeasure):
    """mu as a list of (point, mass, s0): each atom is mass * p_{s0}(point, .).

    A Dirac has s0 = 0; a Gaussian density of variance v is one atom with s0 = v.
    """
    if isinstance(mu, GaussianDensity):
        return [(np.asarray(mu.mean), mu.total_mass, mu.variance)]
    return [(np.asarray(p), w, 0.0) for p, w in mu.atoms()]


def first_moment_X(mu: InitialMeasure, phi, t: float) -> float:
    """<mu, P_t phi>."""
    d = measure_dim(mu)
    return float(sum(w * semigroup_apply(t + s0, phi, p, d) for p, w, s0 in _atoms(mu)))


def first_moment_Y(mu: InitialMeasure, phi, t: float) -> float:
    """<mu, Q_t phi> = int_0^t <mu, P_s phi> ds."""
    if t == 0:
        return 0.0
    d = measure_dim(mu)
    total = 0.0
    for p, w, s0 in _atoms(mu):
        if s0 == 0:
            total += w * q_operator(t, phi, p, d)
        else:
            total += w * (q_operator(t + s0, phi, p, d) - q_operator(s0, phi, p, d))
    return float(total)


# ---------------------------------------------------------------------------
# Feynman-Kac Monte Carlo


def _check_fn(phi) -> None:
    if not isinstance(phi, (Constant, GaussianBump)):
        raise UnsupportedFunctionError("second-moment oracles support Constant and GaussianBump test functions")


def _eval(phi, x: np.ndarray) -> np.ndarray:
    # x: (..., d)
    if isinstance(phi, Constant):
        return np.full(x.shape[:-1], float(phi.c))
    r2 = ((x - np.asarray(phi.center)) ** 2).sum(axis=-1)
    return heat_density(phi.h, r2, x.shape[-1])


def _q_eval(phi, tau: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Q_tau phi(x) with tau broadcast against x[..., 0]."""
    if isinstance(phi, Constant):
        return phi.c * np.broadcast_to(tau, x.shape[:-1])
    r = np.sqrt(((x - np.asarray(phi.center)) ** 2).sum(axis=-1))
    return gaussian_time_integral(phi.h, tau + phi.h, r, x.shape[-1])


def _g(kernel, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if isinstance(kernel, env.Zero):
        return np.zeros(a.shape[:-1])
    return np.asarray(kernel(a, b), dtype=float)


def _sample_starts(mu: InitialMeasure, n: int, rng: np.random.Generator) -> np.ndarray:
    atoms = _atoms(mu)
    masses = np.array([w for _, w, _ in atoms])
    idx = rng.choice(len(atoms), size=n, p=masses / masses.sum()) if len(atoms) > 1 else np.zeros(n, dtype=int)
    d = measure_dim(mu)
    pts = np.array([p for p, _, _ in atoms])[idx]
    s0 = np.array([s for _, _, s in atoms])[idx]
    if np.any(s0 > 0):
        pts = pts + np.sqrt(s0)[:, None] * rng.standard_normal((n, d))
    return pts


def _pair_functional(kind: str, pairs, x: np.ndarray, y: np.ndarray, horizon: np.ndarray,
                     kernel, dt_fk: float, rng: np.random.Generator, unit_weight: bool) -> np.ndarray:
    """Per-path values of the X- or Y-integrand for each (phi, psi) in ``pairs``.

    x, y: (n, d) start points; horizon: (n,) path lengths. All paths use
    n_fk = ceil(max(horizon)/dt_fk) steps of length horizon/n_fk each, so a
    path of horizon s has its own step s/n_fk.
    """
    n, d = x.shape
    n_fk = max(1, int(math.ceil(float(horizon.max()) / dt_fk - 1e-9)))
    h = horizon / n_fk
    sq = np.sqrt(h)[:, None]
    B, Bt = x.copy(), y.copy()
    logw = np.zeros(n)
    out = np.zeros((len(pairs), n))
    for j in range(n_fk + 1):
        u = j * h
        w = np.exp(logw)
        if kind == "Y":
            # trapezoid weights on the path grid
            c = np.where((j == 0) | (j == n_fk), 0.5, 1.0) * h
            rem = horizon - u
            for i, (phi, psi) in enumerate(pairs):
                val = _eval(phi, B) * _q_eval(psi, rem, Bt) + _eval(psi, Bt) * _q_eval(phi, rem, B)
                out[i] += c * val * w
        if j == n_fk:
            break
        if not unit_weight:
            logw += h * _g(kernel, B, Bt)
        B = B + sq * rng.standard_normal((n, d))
        Bt = Bt + sq * rng.standard_normal((n, d))
    if kind == "X":
        w = np.exp(logw)
        for i, (phi, psi) in enumerate(pairs):
            out[i] = w * _eval(phi, B) * _eval(psi, Bt)
    return out


@dataclass
class FKEstimate:
    value: float
    se: float
    product_term: float
    product_se: float
    branch_term: float
    branch_se: float
    n_paths: int


def _running_moments(chunks: list) -> tuple[float, float]:
    vals = np.concatenate(chunks)
    n = vals.size
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0


def second_moments(kind: str, mu: InitialMeasure, pairs: Sequence, t: float, kernel, n_paths: int,
                   dt_fk: float | None = None, rng: np.random.Generator | None = None,
                   unit_weight: bool = False, chunk: int = DEFAULT_CHUNK) -> list:
    """Feynman-Kac estimates of E[X_t(phi)X_t(psi)] (kind="X") or E[Y_t(phi)Y_t(psi)] (kind="Y").

    ``pairs`` is a list of (phi, psi); all share the same Brownian pairs.
    n_paths pairs are spent on each of the two terms.
    """
    if kind not in ("X", "Y"):
        raise ValueError("kind must be 'X' or 'Y'")
    for phi, psi in pairs:
        _check_fn(phi)
        _check_fn(psi)
    if rng is None:
        rng = np.random.default_rng(0)
    if t == 0:
        if kind == "Y":
            return [FKEstimate(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, n_paths) for _ in pairs]
        m1 = [first_moment_X(mu, phi, 0.0) * first_moment_X(mu, psi, 0.0) for phi, psi in pairs]
        return [FKEstimate(v, 0.0, v, 0.0, 0.0, 0.0, n_paths) for v in m1]
    if dt_fk is None:
        dt_fk = 1e-3 * t
    mass = sum(w for _, w, _ in _atoms(mu))
    d = measure_dim(mu)
    prod = [[] for _ in pairs]
    branch = [[] for _ in pairs]
    done = 0
    while done < n_paths:
        n = min(chunk, n_paths - done)
        x = _sample_starts(mu, n, rng)
        y = _sample_starts(mu, n, rng)
        vals = _pair_functional(kind, pairs, x, y, np.full(n, t), kernel, dt_fk, rng, unit_weight)
        for i in range(len(pairs)):
            prod[i].append(mass * mass * vals[i])
        s = t * rng.random(n)
        x0 = _sample_starts(mu, n, rng)
        z = x0 + np.sqrt(t - s)[:, None] * rng.standard_normal((n, d))
        vals = _pair_functional(kind, pairs, z, z.copy(), s, kernel, dt_fk, rng, unit_weight)
        for i in range(len(pairs)):
            branch[i].append(t * mass * vals[i])
        done += n
    out = []
    for i in range(len(pairs)):
        pm, ps = _running_moments(prod[i])
        bm, bs = _running_moments(branch[i])
        out.append(FKEstimate(pm + bm, math.hypot(ps, bs), pm, ps, bm, bs, n_paths))
    return out


def second_moment_X(mu, phi, psi, t, kernel, n_paths, dt_fk=None, rng=None, unit_weight=False) -> tuple:
    """E[X_t(phi) X_t(psi)] as (value, se)."""
    e = second_moments("X", mu, [(phi, psi)], t, kernel, n_paths, dt_fk, rng, unit_weight)[0]
    return e.value, e.se


def second_moment_Y(mu, phi, psi, t, kernel, n_paths, dt_fk=None, rng=None, unit_weight=False) -> tuple:
    """E[Y_t(phi) Y_t(psi)] as (value, se)."""
    e = second_moments("Y", mu, [(phi, psi)], t, kernel, n_paths, dt_fk, rng, unit_weight)[0]
    return e.value, e.se


# ---------------------------------------------------------------------------
# semi-analytic second moments for a Constant environment


def _gl_unit(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _smoothed(phi, shift: np.ndarray, x: np.ndarray, s0: float, d: int) -> np.ndarray:
    """<p_{s0}(x, .), P_shift phi>, vectorized over shift."""
    if isinstance(phi, Constant):
        return np.full(np.shape(shift), float(phi.c))
    r2 = float(((x - np.asarray(phi.center)) ** 2).sum())
    return heat_density(shift + phi.h + s0, r2, d)


def _product_mean(phi, U, psi, R, T, x, s0, d):
    """<p_{s0}(x,.), P_T[(P_U phi)(P_R psi)]>, vectorized over U, R, T."""
    if isinstance(phi, Constant) and isinstance(psi, Constant):
        return np.full(np.broadcast(U, R, T).shape, phi.c * psi.c)
    if isinstance(phi, Constant):
        return phi.c * _smoothed(psi, R + T, x, s0, d)
    if isinstance(psi, Constant):
        return psi.c * _smoothed(phi, U + T, x, s0, d)
    a, b = np.asarray(phi.center), np.asarray(psi.center)
    Ua, Rb = U + phi.h, R + psi.h
    # p_Ua(z-a) p_Rb(z-b) = p_{Ua+Rb}(a-b) p_{Ua Rb/(Ua+Rb)}(z - c)
    S = Ua + Rb
    c = (Rb[..., None] * a + Ua[..., None] * b) / S[..., None]
    amp = heat_density(S, float(((a - b) ** 2).sum()), d)
    r2 = ((x - c) ** 2).sum(axis=-1)
    return amp * heat_density(T + Ua * Rb / S + s0, r2, d)


def constant_kernel_second_moment(kind: str, mu: InitialMeasure, phi, psi, t: float, c: float,
                                  nodes: int = 48) -> float:
    """Semi-analytic E[X_t(phi)X_t(psi)] or E[Y_t(phi)Y_t(psi)] under g = c.

    The weight exp(c s) is deterministic, so every inner expectation is a
    Gaussian integral in closed form; the remaining time integrals use
    Gauss-Legendre product rules (the integrands are smooth for bumps with h > 0).
    """
    _check_fn(phi)
    _check_fn(psi)
    d = measure_dim(mu)
    atoms = _atoms(mu)
    if t == 0:
        return 0.0 if kind == "Y" else first_moment_X(mu, phi, 0) * first_moment_X(mu, psi, 0)
    q, w = _gl_unit(nodes)
    if kind == "X":
        prod = math.exp(c * t) * first_moment_X(mu, phi, t) * first_moment_X(mu, psi, t)
        s = t * q
        branch = 0.0
        for x, m, s0 in atoms:
            vals = np.exp(c * s) * _product_mean(phi, s, psi, s, t - s, x, s0, d)
            branch += m * t * float(w @ vals)
        return prod + branch
    # kind == "Y"
    u = t * q
    # product term: int_0^t du e^{cu} [<mu,P_u phi><mu, int_u^t P_r psi dr> + sym]
    def mu_P(f, tt):
        return np.array([sum(m * _smoothed(f, np.asarray(ti), x, s0, d) for x, m, s0 in atoms) for ti in tt])

    def mu_int(f, lo, hi):
        out = np.zeros_like(lo)
        for x, m, s0 in atoms:
            if isinstance(f, Constant):
                out += m * f.c * (hi - lo)
            else:
                r = math.sqrt(float(((x - np.asarray(f.center)) ** 2).sum()))
                out += m * gaussian_time_integral(lo + f.h + s0, hi + f.h + s0, r, d)
        return out

    prod = float(w @ (t * np.exp(c * u) * (mu_P(phi, u) * mu_int(psi, u, np.full_like(u, t))
                                            + mu_P(psi, u) * mu_int(phi, u, np.full_like(u, t)))))
    # branch term: int_0^t ds <mu, P_{t-s} diag V_s>,
    # diag V_s(z) = int_0^s du e^{cu} int_u^s dr [P_u phi(z) P_r psi(z) + sym]
    S, Uq, Rq = np.meshgrid(q, q, q, indexing="ij")
    W = w[:, None, None] * w[None, :, None] * w[None, None, :]
    s = t * S
    uu = s * Uq
    rr = uu + (s - uu) * Rq
    jac = t * s * (s - uu)
    branch = 0.0
    for x, m, s0 in atoms:
        vals = _product_mean(phi, uu, psi, rr, t - s, x, s0, d) + _product_mean(psi, uu, phi, rr, t - s, x, s0, d)
        branch += m * float((W * jac * np.exp(c * uu) * vals).sum())
    return prod + branch


# ---------------------------------------------------------------------------
# V_1 on a lattice with a shared noise realization


@dataclass
class NoiseGrid:
    """Environment increments W(t_{n+1}, z) - W(t_n, z) at the lattice nodes."""

    grid: Grid
    dt: float
    increments: np.ndarray  # (n_steps, n_nodes)

    @classmethod
    def sample(cls, kernel, grid: Grid, dt: float, n_steps: int, rng: np.random.Generator) -> "NoiseGrid":
        nodes = grid.nodes()
        if isinstance(kernel, env.Zero):
            return cls(grid, dt, np.zeros((n_steps, nodes.shape[0])))
        L = env.factor(kernel, nodes)
        z = rng.standard_normal((n_steps, L.shape[1]))
        return cls(grid, dt, math.sqrt(dt) * z @ L.T)

    @property
    def n_steps(self) -> int:
        return self.increments.shape[0]


def _heat_matrix(axis: np.ndarray, tau: float) -> np.ndarray:
    dz = axis[1] - axis[0] if axis.size > 1 else 1.0
    diff = axis[:, None] - axis[None, :]
    return dz * np.exp(-0.5 * diff * diff / tau) / math.sqrt(2 * math.pi * tau)


def _apply_heat(field: np.ndarray, mats: list) -> np.ndarray:
    out = field
    for ax, M in enumerate(mats):
        out = np.moveaxis(np.tensordot(M, np.moveaxis(out, ax, 0), axes=(1, 0)), 0, ax)
    return out


def v1_field(phi, kernel, t: float, grid: Grid, noise: NoiseGrid | None = None,
             rng: np.random.Generator | None = None, dt: float | None = None) -> np.ndarray:
    """V_1(t, .) on the grid, the solution of dV = (Delta/2) V dt + V W(dt, x) + phi dt, V(0) = 0.

    Mild form split as V = Q_t phi + U with the exact mean Q_t phi and
    U_{n+1} = P_dt [U_n + (Q_{t_n} phi + U_n) dW_n] (Euler, lattice heat kernel).
    The noise correlation is resolved at the lattice pitch.
    """
    _check_fn(phi)
    if t == 0:
        return np.zeros(grid.shape)
    nodes = grid.nodes()
    pitch = min(grid.step)
    if isinstance(phi, GaussianBump) and math.sqrt(phi.h) < pitch:
        raise ResolutionError(f"lattice pitch {pitch:g} exceeds the bump width sqrt(h)={math.sqrt(phi.h):g}")
    if noise is None:
        if dt is None:
            raise DomainError("pass either a NoiseGrid or a time step")
        n_steps = int(round(t / dt))
        noise = NoiseGrid.sample(kernel, grid, dt, n_steps, rng if rng is not None else np.random.default_rng(0))
    dt = noise.dt
    n_steps = int(round(t / dt))
    if n_steps > noise.n_steps:
        raise DomainError("noise grid is shorter than the requested horizon")
    if math.sqrt(dt) < pitch:
        raise ResolutionError(f"heat step sqrt(dt)={math.sqrt(dt):g} is below the lattice pitch {pitch:g}")
    mean_t = _q_eval(phi, np.asarray(t), nodes).reshape(grid.shape)
    if isinstance(kernel, env.Zero):
        return mean_t
    mats = [_heat_matrix(ax, dt) for ax in grid.axes()]
    U = np.zeros(grid.shape)
    for n in range(n_steps):
        q = _q_eval(phi, np.asarray(n * dt), nodes).reshape(grid.shape)
        dW = noise.increments[n].reshape(grid.shape)
        U = _apply_heat(U + (q + U) * dW, mats)
    return mean_t + U
