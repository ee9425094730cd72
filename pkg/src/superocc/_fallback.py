"""Pure-numpy versions of the compiled kernels in ``_core``.

Signatures and semantics match the Cython module one-to-one so either can be
selected at import time (see ``superocc._backend``).
"""
from __future__ import annotations

import numpy as np

NAME = "numpy"

GAUSSIAN = 0
EXPONENTIAL = 1


def _stationary(kind: int, sigma2: float, ell: float, r2: np.ndarray) -> np.ndarray:
    if kind == GAUSSIAN:
        return sigma2 * np.exp(-0.5 * r2 / (ell * ell))
    return sigma2 * np.exp(-np.sqrt(r2) / ell)


def pivoted_cholesky(pos, kind, sigma2, ell, tol, max_rank):
    pos = np.ascontiguousarray(pos, dtype=float)
    n = pos.shape[0]
    if n == 0 or sigma2 <= 0.0:
        return np.zeros((n, 0))
    max_rank = min(int(max_rank), n)
    L = np.zeros((n, max_rank))
    diag = np.full(n, float(sigma2))
    trace = n * sigma2
    r = 0
    for k in range(max_rank):
        resid = diag.sum()
        p = int(np.argmax(diag))
        best = diag[p]
        if resid <= tol * trace or best <= 0.0:
            break
        lp = np.sqrt(best)
        r2 = ((pos - pos[p]) ** 2).sum(axis=1)
        col = _stationary(kind, sigma2, ell, r2)
        if k:
            col -= L[:, :k] @ L[p, :k]
        L[:, k] = col / lp
        diag -= L[:, k] ** 2
        np.maximum(diag, 0.0, out=diag)
        diag[p] = 0.0
        r = k + 1
    return np.ascontiguousarray(L[:, :r])


def ou_chain(xs_sorted, z, sigma2, ell):
    xs_sorted = np.asarray(xs_sorted, dtype=float)
    z = np.asarray(z, dtype=float)
    n = xs_sorted.shape[0]
    out = np.empty(n)
    if n == 0:
        return out
    s = np.sqrt(sigma2)
    rho = np.exp(-np.diff(xs_sorted) / ell)
    innov = s * np.sqrt(1.0 - rho * rho) * z[1:]
    out[0] = s * z[0]
    prev = out[0]
    for i in range(1, n):
        prev = rho[i - 1] * prev + innov[i - 1]
        out[i] = prev
    return out


def heat_sum(pos, a, u):
    pos = np.asarray(pos, dtype=float)
    d = pos.shape[1]
    r2 = ((pos - np.asarray(a, dtype=float)) ** 2).sum(axis=1)
    return float((2.0 * np.pi * u) ** (-0.5 * d) * np.exp(-0.5 * r2 / u).sum())


def density_accumulate(pos, weight, h, origin, step, shape, out, cutoff):
    pos = np.asarray(pos, dtype=float)
    n, d = pos.shape
    if d > 3:
        raise ValueError("density grids are limited to d <= 3")
    if n == 0:
        return
    shape = tuple(int(s) for s in shape)
    norm = weight * (2.0 * np.pi * h) ** (-0.5 * d)
    reach = cutoff * np.sqrt(h)
    grid = out.reshape(shape)
    # per-axis factors are exact Gaussians; tails beyond `reach` are zeroed to
    # mirror the compiled kernel bit-for-bit in which nodes contribute
    factors = []
    for c in range(d):
        nodes = origin[c] + np.arange(shape[c]) * step[c]
        diff = nodes[None, :] - pos[:, c : c + 1]
        lo = np.maximum(np.ceil((pos[:, c] - reach - origin[c]) / step[c]), 0)
        hi = np.minimum(np.floor((pos[:, c] + reach - origin[c]) / step[c]), shape[c] - 1)
        idx = np.arange(shape[c])[None, :]
        mask = (idx >= lo[:, None]) & (idx <= hi[:, None])
        factors.append(np.where(mask, np.exp(-0.5 * diff * diff / h), 0.0))
    if d == 1:
        grid += norm * factors[0].sum(axis=0)
    elif d == 2:
        grid += norm * np.einsum("ni,nj->ij", factors[0], factors[1])
    else:
        grid += norm * np.einsum("ni,nj,nk->ijk", factors[0], factors[1], factors[2])
