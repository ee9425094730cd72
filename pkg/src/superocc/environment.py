"""Gaussian environment W, white in time and coloured in space.

``sample_increment`` draws W(t+dt, x_i) - W(t, x_i) at a finite set of
positions: a centred Gaussian vector with covariance dt * G, G_ij = g(x_i, x_j).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import linalg

from . import _backend
from .errors import DomainError, FactorizationError

JITTER_BUDGET = 1e-10
LOWRANK_TOL = 1e-12
LOWRANK_MAX_RANK = 256
DENSE_LIMIT = 64


@dataclass(frozen=True)
class Zero:
    kind = "zero"

    @property
    def sup_norm(self) -> float:
        return 0.0

    def __call__(self, x, y) -> np.ndarray:
        return np.zeros(np.broadcast_shapes(np.shape(x)[:-1], np.shape(y)[:-1]))


@dataclass(frozen=True)
class Constant:
    c: float
    kind = "constant"

    def __post_init__(self):
        if not self.c >= 0:
            raise DomainError("Constant kernel needs c >= 0")

    @property
    def sup_norm(self) -> float:
        return float(self.c)

    def __call__(self, x, y) -> np.ndarray:
        return np.full(np.broadcast_shapes(np.shape(x)[:-1], np.shape(y)[:-1]), float(self.c))


@dataclass(frozen=True)
class GaussianKernel:
    """sigma2 * exp(-|x-y|^2 / (2 ell^2))."""

    sigma2: float
    length_scale: float
    kind = "gaussian"

    def __post_init__(self):
        if not self.sigma2 >= 0 or not self.length_scale > 0:
            raise DomainError("GaussianKernel needs sigma2 >= 0 and length_scale > 0")

    @property
    def sup_norm(self) -> float:
        return float(self.sigma2)

    def __call__(self, x, y) -> np.ndarray:
        r2 = ((np.asarray(x, dtype=float) - np.asarray(y, dtype=float)) ** 2).sum(axis=-1)
        return self.sigma2 * np.exp(-0.5 * r2 / self.length_scale**2)


@dataclass(frozen=True)
class ExponentialKernel:
    """sigma2 * exp(-|x-y| / ell)."""

    sigma2: float
    length_scale: float
    kind = "exponential"

    def __post_init__(self):
        if not self.sigma2 >= 0 or not self.length_scale > 0:
            raise DomainError("ExponentialKernel needs sigma2 >= 0 and length_scale > 0")

    @property
    def sup_norm(self) -> float:
        return float(self.sigma2)

    def __call__(self, x, y) -> np.ndarray:
        r = np.sqrt(((np.asarray(x, dtype=float) - np.asarray(y, dtype=float)) ** 2).sum(axis=-1))
        return self.sigma2 * np.exp(-r / self.length_scale)


CovKernel = Union[Zero, Constant, GaussianKernel, ExponentialKernel]


def kernel_from_dict(spec: dict) -> CovKernel:
    kind = spec.get("kind")
    if kind == "zero":
        return Zero()
    if kind == "constant":
        return Constant(float(spec["c"]))
    if kind == "gaussian":
        return GaussianKernel(float(spec["sigma2"]), float(spec["length_scale"]))
    if kind == "exponential":
        return ExponentialKernel(float(spec["sigma2"]), float(spec["length_scale"]))
    raise DomainError(f"unknown kernel kind {kind!r}")


def kernel_to_dict(kernel: CovKernel) -> dict:
    if isinstance(kernel, Zero):
        return {"kind": "zero"}
    if isinstance(kernel, Constant):
        return {"kind": "constant", "c": kernel.c}
    return {"kind": kernel.kind, "sigma2": kernel.sigma2, "length_scale": kernel.length_scale}


@dataclass
class NoiseIncrement:
    positions: np.ndarray
    dt: float
    values: np.ndarray


def _points(positions) -> np.ndarray:
    pos = np.asarray(positions, dtype=float)
    if pos.ndim == 1:
        pos = pos.reshape(-1, 1)
    return np.ascontiguousarray(pos)


def covariance_matrix(kernel: CovKernel, positions) -> np.ndarray:
    """G_ij = g(x_i, x_j) on the given positions (no jitter applied here)."""
    pos = _points(positions)
    return np.asarray(kernel(pos[:, None, :], pos[None, :, :]), dtype=float)


def cholesky_with_jitter(G: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, adding the smallest sufficient diagonal jitter.

    Jitter grows geometrically from 1e-16 * trace and is capped at 1e-10 * trace.
    """
    n = G.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    trace = float(np.trace(G))
    if trace == 0.0:
        return np.zeros_like(G)
    try:
        return linalg.cholesky(G, lower=True)
    except linalg.LinAlgError:
        pass
    jitter = 1e-16 * trace
    while jitter <= JITTER_BUDGET * trace * (1 + 1e-12):
        try:
            return linalg.cholesky(G + jitter * np.eye(n), lower=True)
        except linalg.LinAlgError:
            jitter *= 10.0
    raise FactorizationError(
        f"covariance matrix of size {n} is not PSD within jitter {JITTER_BUDGET:g}*trace")


def factor(kernel: CovKernel, positions, method: str = "auto") -> np.ndarray:
    """A factor L with G ~= L L^T; the number of columns is the numerical rank used.

    ``method``: "dense" (jittered Cholesky), "lowrank" (pivoted Cholesky,
    residual trace <= 1e-12 * trace) or "auto".
    """
    pos = _points(positions)
    n = pos.shape[0]
    if isinstance(kernel, Zero) or kernel.sup_norm == 0.0:
        return np.zeros((n, 0))
    if isinstance(kernel, Constant):
        return np.full((n, 1), np.sqrt(kernel.c))
    if method == "dense" or (method == "auto" and n <= DENSE_LIMIT):
        return cholesky_with_jitter(covariance_matrix(kernel, pos))
    kind = _backend.GAUSSIAN if isinstance(kernel, GaussianKernel) else _backend.EXPONENTIAL
    max_rank = min(n, LOWRANK_MAX_RANK)
    L = _backend.pivoted_cholesky(pos, kind, kernel.sigma2, kernel.length_scale, LOWRANK_TOL, max_rank)
    if L.shape[1] == max_rank and max_rank < n:
        # did not converge within the rank cap; fall back to the exact route
        return cholesky_with_jitter(covariance_matrix(kernel, pos))
    return L


def sample_field(kernel: CovKernel, positions, rng: np.random.Generator, method: str = "auto") -> np.ndarray:
    """One draw of the unit-time field zeta ~ N(0, G) at the positions."""
    pos = _points(positions)
    n = pos.shape[0]
    if isinstance(kernel, Zero) or n == 0:
        return np.zeros(n)
    if isinstance(kernel, Constant):
        return np.full(n, np.sqrt(kernel.c) * rng.standard_normal())
    if isinstance(kernel, ExponentialKernel) and pos.shape[1] == 1 and method in ("auto", "markov"):
        # exact Ornstein-Uhlenbeck recursion along sorted points
        order = np.argsort(pos[:, 0], kind="stable")
        z = rng.standard_normal(n)
        vals = _backend.ou_chain(np.ascontiguousarray(pos[order, 0]), z, kernel.sigma2, kernel.length_scale)
        out = np.empty(n)
        out[order] = vals
        return out
    L = factor(kernel, pos, "auto" if method == "markov" else method)
    return L @ rng.standard_normal(L.shape[1])


def sample_increment(kernel: CovKernel, positions, dt: float, rng: np.random.Generator,
                     method: str = "auto") -> NoiseIncrement:
    """sqrt(dt) * zeta with zeta ~ N(0, G); bit-identical for equal rng state."""
    if not dt > 0:
        raise DomainError("dt must be > 0")
    pos = _points(positions)
    values = np.sqrt(dt) * sample_field(kernel, pos, rng, method)
    return NoiseIncrement(pos, dt, values)


def replicate_rng(seed: int, replicate: int, stream: int = 0) -> np.random.Generator:
    """Independent PCG64 stream for (master seed, replicate index[, sub-stream])."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(replicate), int(stream)))
    return np.random.Generator(np.random.PCG64(ss))
