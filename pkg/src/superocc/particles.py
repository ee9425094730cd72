"""Branching particle approximation of the superprocess in a random environment.

One step of length dt = m (the particle mass):

1. every particle makes an independent Gaussian move with covariance dt * I;
2. the unit-time environment field zeta ~ N(0, G) is drawn at the new positions;
3. each particle independently splits in two with probability
   clamp((1 + sqrt(dt) * zeta_i) / 2, 0, 1) and otherwise dies.
   Offspring sit at the parent position.

Random numbers are consumed in that order (motion, field, branching), so a
trajectory is a deterministic function of its generator state.
"""
from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from . import environment as env
from .errors import ConfigError, DomainError, PopulationCapError, UnsupportedFunctionError
from .kernels import Constant as ConstFn
from .kernels import PowerLaw, check_dim

DEFAULT_POPULATION_CAP = 2_000_000
BINARY_MAGIC = b"SOCC"
BINARY_VERSION = 1


# ---------------------------------------------------------------------------
# initial measures


@dataclass(frozen=True)
class Dirac:
    point: tuple
    mass: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "point", tuple(float(c) for c in np.atleast_1d(self.point)))
        if not self.mass > 0:
            raise DomainError("Dirac mass must be > 0")

    @property
    def total_mass(self) -> float:
        return self.mass

    def atoms(self):
        return [(self.point, self.mass)]


@dataclass(frozen=True)
class WeightedDiracs:
    points: tuple
    masses: tuple

    def __post_init__(self):
        pts = tuple(tuple(float(c) for c in np.atleast_1d(p)) for p in self.points)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "masses", tuple(float(w) for w in self.masses))
        if len(pts) != len(self.masses) or not pts:
            raise DomainError("WeightedDiracs needs matching, non-empty points and masses")
        if any(not w > 0 for w in self.masses):
            raise DomainError("WeightedDiracs masses must be > 0")
        if len({len(p) for p in pts}) != 1:
            raise DomainError("WeightedDiracs points must share one dimension")

    @property
    def total_mass(self) -> float:
        return float(sum(self.masses))

    def atoms(self):
        return list(zip(self.points, self.masses))


@dataclass(frozen=True)
class GaussianDensity:
    """total_mass * N(mean, variance * I)."""

    mean: tuple
    variance: float
    total_mass: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "mean", tuple(float(c) for c in np.atleast_1d(self.mean)))
        if not self.variance > 0 or not self.total_mass > 0:
            raise DomainError("GaussianDensity needs variance > 0 and total_mass > 0")


InitialMeasure = Union[Dirac, WeightedDiracs, GaussianDensity]


def measure_dim(mu: InitialMeasure) -> int:
    if isinstance(mu, Dirac):
        return len(mu.point)
    if isinstance(mu, WeightedDiracs):
        return len(mu.points[0])
    return len(mu.mean)


def sample_initial(mu: InitialMeasure, unit_mass: float, rng: np.random.Generator) -> np.ndarray:
    """Particle positions representing mu with particles of mass ``unit_mass``.

    Atom masses are rounded to the nearest multiple of the particle mass.
    """
    d = measure_dim(mu)
    if isinstance(mu, GaussianDensity):
        n = int(round(mu.total_mass / unit_mass))
        return np.asarray(mu.mean) + math.sqrt(mu.variance) * rng.standard_normal((n, d))
    blocks = [np.tile(np.asarray(p), (int(round(w / unit_mass)), 1)) for p, w in mu.atoms()]
    return np.concatenate(blocks, axis=0).reshape(-1, d)


def measure_to_dict(mu: InitialMeasure) -> dict:
    if isinstance(mu, Dirac):
        return {"kind": "dirac", "point": list(mu.point), "mass": mu.mass}
    if isinstance(mu, WeightedDiracs):
        return {"kind": "weighted_diracs", "points": [list(p) for p in mu.points], "masses": list(mu.masses)}
    return {"kind": "gaussian_density", "mean": list(mu.mean), "variance": mu.variance,
            "total_mass": mu.total_mass}


def measure_from_dict(spec: dict) -> InitialMeasure:
    kind = spec.get("kind")
    if kind == "dirac":
        return Dirac(tuple(spec["point"]), float(spec.get("mass", 1.0)))
    if kind == "weighted_diracs":
        return WeightedDiracs(tuple(tuple(p) for p in spec["points"]), tuple(spec["masses"]))
    if kind == "gaussian_density":
        return GaussianDensity(tuple(spec["mean"]), float(spec["variance"]), float(spec.get("total_mass", 1.0)))
    raise DomainError(f"unknown initial measure kind {kind!r}")


# ---------------------------------------------------------------------------
# clouds and configuration


@dataclass
class ParticleCloud:
    time: float
    positions: np.ndarray  # shape (count, d)
    unit_mass: float

    @property
    def count(self) -> int:
        return int(self.positions.shape[0])

    @property
    def mass(self) -> float:
        return self.unit_mass * self.count

    @property
    def dim(self) -> int:
        return int(self.positions.shape[1])


@dataclass
class SimConfig:
    d: int
    mu: InitialMeasure
    kernel: env.CovKernel
    unit_mass: float
    horizon: float
    snapshot_stride: int = 1
    seed: int = 0
    population_cap: int = DEFAULT_POPULATION_CAP
    field_method: str = "auto"
    # test-harness switches
    freeze_motion: bool = False
    freeze_branching: bool = False

    def __post_init__(self):
        check_dim(self.d)
        if measure_dim(self.mu) != self.d:
            raise ConfigError("initial measure dimension differs from d", "mu")
        if not self.unit_mass > 0:
            raise ConfigError("unit mass must be > 0", "unit_mass")
        if self.horizon < 0:
            raise ConfigError("horizon must be >= 0", "horizon")
        if int(self.snapshot_stride) < 1:
            raise ConfigError("snapshot stride must be >= 1", "snapshot_stride")
        ratio = self.horizon / self.dt
        if abs(ratio - round(ratio)) > 1e-6 * max(1.0, ratio):
            raise ConfigError(f"horizon {self.horizon} is not a multiple of dt={self.dt}", "horizon")
        if self.kernel.sup_norm * math.sqrt(self.dt) > 0.5:
            raise ConfigError(
                f"clamp guard violated: ||g|| sqrt(dt) = {self.kernel.sup_norm * math.sqrt(self.dt):.3g} > 1/2; "
                "use a smaller unit mass", "unit_mass")

    @property
    def dt(self) -> float:
        return self.unit_mass

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))


@dataclass
class StepStats:
    n_clamped: int = 0
    n_split: int = 0
    n_parents: int = 0


@dataclass
class Trajectory:
    config: SimConfig
    snapshots: list  # ParticleCloud at k = 0, stride, 2*stride, ..., and the final step
    masses: np.ndarray  # X_{t_k}(1) at every step k = 0..n_steps
    n_clamped: np.ndarray  # per step
    n_parents: np.ndarray  # per step, particles that faced a branching decision
    observed: dict = field(default_factory=dict)

    @property
    def dt(self) -> float:
        return self.config.dt

    @property
    def times(self) -> np.ndarray:
        return np.array([c.time for c in self.snapshots])

    @property
    def clamp_fraction(self) -> float:
        total = int(self.n_parents.sum())
        return float(self.n_clamped.sum()) / total if total else 0.0

    @property
    def extinction_time(self):
        dead = np.nonzero(self.masses == 0)[0]
        return float(dead[0] * self.dt) if dead.size else None

    def snapshot_dt(self) -> float:
        return self.config.snapshot_stride * self.config.dt

    def full_resolution(self) -> bool:
        return self.config.snapshot_stride == 1


# ---------------------------------------------------------------------------
# dynamics


def step(cloud: ParticleCloud, kernel: env.CovKernel, dt: float, rng: np.random.Generator,
         stats: StepStats | None = None, *, freeze_motion: bool = False,
         freeze_branching: bool = False, field_method: str = "auto",
         zeta: np.ndarray | None = None) -> ParticleCloud:
    """Advance ``cloud`` by one step of length dt (which must equal the unit mass).

    ``zeta`` forces the environment field at the post-motion positions.
    """
    if not math.isclose(dt, cloud.unit_mass, rel_tol=1e-12):
        raise DomainError("the scheme couples dt to the particle mass: dt must equal unit_mass")
    pos = cloud.positions
    n, d = pos.shape
    if n and not freeze_motion:
        pos = pos + math.sqrt(dt) * rng.standard_normal((n, d))
    if freeze_branching or n == 0:
        return ParticleCloud(cloud.time + dt, pos, cloud.unit_mass)
    if zeta is None:
        zeta = env.sample_field(kernel, pos, rng, field_method)
    p = 0.5 * (1.0 + math.sqrt(dt) * np.asarray(zeta, dtype=float))
    clamped = int(np.count_nonzero((p < 0.0) | (p > 1.0)))
    np.clip(p, 0.0, 1.0, out=p)
    split = rng.random(n) < p
    new_pos = np.repeat(pos[split], 2, axis=0)
    if stats is not None:
        stats.n_clamped += clamped
        stats.n_split += int(split.sum())
        stats.n_parents += n
    return ParticleCloud(cloud.time + dt, new_pos, cloud.unit_mass)


Observer = Callable[[int, ParticleCloud], None]


def run(config: SimConfig, rng: np.random.Generator | None = None,
        observers: Sequence[Observer] = (), keep_snapshots: bool = True) -> Trajectory:
    """Simulate one trajectory on [0, T].

    Observers are called as ``obs(k, cloud)`` at every step k = 0..n_steps
    (before stepping), independent of the snapshot stride.
    """
    if rng is None:
        rng = env.replicate_rng(config.seed, 0)
    dt = config.dt
    n_steps = config.n_steps
    cloud = ParticleCloud(0.0, sample_initial(config.mu, config.unit_mass, rng), config.unit_mass)
    snaps = []
    masses = np.empty(n_steps + 1)
    clamped = np.zeros(n_steps, dtype=np.int64)
    parents = np.zeros(n_steps, dtype=np.int64)
    for k in range(n_steps + 1):
        cloud.time = k * dt  # no drift from repeated addition
        masses[k] = cloud.mass
        for obs in observers:
            obs(k, cloud)
        if keep_snapshots and (k % config.snapshot_stride == 0 or k == n_steps):
            snaps.append(cloud)
        if k == n_steps:
            break
        stats = StepStats()
        cloud = step(cloud, config.kernel, dt, rng, stats, freeze_motion=config.freeze_motion,
                     freeze_branching=config.freeze_branching, field_method=config.field_method)
        clamped[k] = stats.n_clamped
        parents[k] = stats.n_parents
        if cloud.count > config.population_cap:
            raise PopulationCapError(
                f"population {cloud.count} exceeds cap {config.population_cap} at t={cloud.time:.6g}; "
                "use a larger unit mass")
    return Trajectory(config, snaps, masses, clamped, parents)


# ---------------------------------------------------------------------------
# functionals


def evaluate(phi, positions: np.ndarray) -> tuple[np.ndarray, int]:
    """phi at the positions; PowerLaw values at the singular centre become 0.

    Returns the values and the number of excluded centre hits.
    """
    if positions.shape[0] == 0:
        return np.zeros(0), 0
    vals = np.asarray(phi(positions), dtype=float)
    if isinstance(phi, PowerLaw):
        hits = ~np.isfinite(vals)
        n_hits = int(hits.sum())
        if n_hits:
            vals = np.where(hits, 0.0, vals)
        return vals, n_hits
    return vals, 0


def integrate(cloud: ParticleCloud, phi, return_hits: bool = False):
    """X_t(phi) = m * sum_i phi(x_i)."""
    vals, hits = evaluate(phi, cloud.positions)
    total = cloud.unit_mass * float(vals.sum())
    return (total, hits) if return_hits else total


def half_laplacian(phi, positions: np.ndarray) -> np.ndarray:
    if isinstance(phi, PowerLaw):
        raise UnsupportedFunctionError("martingale tracking needs a twice differentiable phi")
    if isinstance(phi, ConstFn):
        return np.zeros(positions.shape[0])
    return np.asarray(phi.half_laplacian(positions), dtype=float)


def interaction(kernel: env.CovKernel, positions: np.ndarray, weights: np.ndarray) -> float:
    """sum_ij g(x_i, x_j) w_i w_j, i.e. the double integral of g phi phi against X X."""
    if positions.shape[0] == 0 or isinstance(kernel, env.Zero):
        return 0.0
    if isinstance(kernel, env.Constant):
        return kernel.c * float(weights.sum()) ** 2
    # offspring share their parent's position; merge them before factoring
    pos, inv = np.unique(positions, axis=0, return_inverse=True)
    w = np.bincount(inv.reshape(-1), weights=weights, minlength=pos.shape[0])
    if pos.shape[0] <= env.DENSE_LIMIT:
        G = env.covariance_matrix(kernel, pos)
        return float(w @ G @ w)
    L = env.factor(kernel, pos)
    return float(np.sum((L.T @ w) ** 2))


@dataclass
class FunctionalRecorder:
    """Observer recording X_{t_k}(phi), X_{t_k}((Delta/2) phi), X(phi^2) and the g-term per step."""

    phi: object
    kernel: env.CovKernel
    n_steps: int
    with_qv: bool = True

    def __post_init__(self):
        n = self.n_steps + 1
        self.x_phi = np.zeros(n)
        self.x_lap = np.zeros(n)
        self.x_phi2 = np.zeros(n)
        self.g_term = np.zeros(n)

    def __call__(self, k: int, cloud: ParticleCloud) -> None:
        pos, m = cloud.positions, cloud.unit_mass
        vals, _ = evaluate(self.phi, pos)
        self.x_phi[k] = m * vals.sum()
        self.x_lap[k] = m * half_laplacian(self.phi, pos).sum() if pos.shape[0] else 0.0
        if self.with_qv:
            self.x_phi2[k] = m * (vals * vals).sum()
            self.g_term[k] = interaction(self.kernel, pos, m * vals)


@dataclass
class MartingaleTracker:
    times: np.ndarray
    M: np.ndarray  # M_{t_k}(phi)
    qv_discrete: np.ndarray  # sum_{j<k} (M_{t_{j+1}} - M_{t_j})^2
    qv_plugin: np.ndarray  # sum_{j<k} dt [X_{t_j}(phi^2) + g-term]


def martingale_from_series(x_phi, x_lap, x_phi2, g_term, dt: float) -> MartingaleTracker:
    n = len(x_phi)
    drift = np.concatenate([[0.0], np.cumsum(dt * np.asarray(x_lap)[:-1])])
    M = np.asarray(x_phi) - x_phi[0] - drift
    dM = np.diff(M)
    qv = np.concatenate([[0.0], np.cumsum(dM * dM)])
    plug = np.concatenate([[0.0], np.cumsum(dt * (np.asarray(x_phi2)[:-1] + np.asarray(g_term)[:-1]))])
    return MartingaleTracker(np.arange(n) * dt, M, qv, plug)


def track_martingale(trajectory: Trajectory, phi) -> MartingaleTracker:
    """M_t(phi) = X_t(phi) - X_0(phi) - int_0^t X_s((Delta/2) phi) ds on the snapshot grid.

    Left-Riemann time integral with the snapshot spacing.
    """
    if isinstance(phi, PowerLaw):
        raise UnsupportedFunctionError("martingale tracking needs a twice differentiable phi")
    rec = FunctionalRecorder(phi, trajectory.config.kernel, len(trajectory.snapshots) - 1)
    for k, cloud in enumerate(trajectory.snapshots):
        rec(k, cloud)
    tr = martingale_from_series(rec.x_phi, rec.x_lap, rec.x_phi2, rec.g_term, trajectory.snapshot_dt())
    tr.times = trajectory.times
    return tr


# ---------------------------------------------------------------------------
# export


def export_csv(trajectory: Trajectory, path) -> None:
    """One row per particle: t, x1[, x2, x3]."""
    d = trajectory.config.d
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x{i + 1}" for i in range(d)])
        for cloud in trajectory.snapshots:
            t = repr(float(cloud.time))
            for row in cloud.positions:
                w.writerow([t] + [repr(float(v)) for v in row])


def export_binary(trajectory: Trajectory, path) -> None:
    """Little-endian layout.

    header: magic b"SOCC", uint32 version, uint32 d, float64 m, uint64 n_snapshots
    per snapshot: float64 t, uint64 count, count*d float64 coordinates (row-major)
    """
    cfg = trajectory.config
    with open(path, "wb") as fh:
        fh.write(BINARY_MAGIC)
        fh.write(struct.pack("<IIdQ", BINARY_VERSION, cfg.d, cfg.unit_mass, len(trajectory.snapshots)))
        for cloud in trajectory.snapshots:
            fh.write(struct.pack("<dQ", cloud.time, cloud.count))
            fh.write(np.ascontiguousarray(cloud.positions, dtype="<f8").tobytes())


def read_binary(path) -> list:
    """Inverse of ``export_binary``: a list of ParticleCloud."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != BINARY_MAGIC:
        raise ValueError("not a trajectory file")
    version, d, m, n_snap = struct.unpack_from("<IIdQ", data, 4)
    if version != BINARY_VERSION:
        raise ValueError(f"unsupported trajectory file version {version}")
    off = 4 + struct.calcsize("<IIdQ")
    clouds = []
    for _ in range(n_snap):
        t, count = struct.unpack_from("<dQ", data, off)
        off += 16
        pos = np.frombuffer(data, dtype="<f8", count=count * d, offset=off).reshape(count, d).copy()
        off += 8 * count * d
        clouds.append(ParticleCloud(t, pos, m))
    return clouds
