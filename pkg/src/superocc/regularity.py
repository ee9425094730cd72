"""Hölder exponents of the occupation density from second-order structure functions.

S(l) = E|Y(x + l) - Y(x)|^2 is averaged over node pairs and replicates and
regressed on log l; the Hölder exponent is slope / 2. Finite bandwidth and
finite dt bias the estimate toward smoothness (larger exponents).
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .errors import InsufficientDataError

MIN_LAGS = 4
MIN_SPAN = 10.0


@dataclass
class StructureFunctionFit:
    lags: list
    values: list
    n_pairs: list
    slope: float
    slope_ci: tuple
    exponent: float
    r2: float

    def to_dict(self) -> dict:
        return asdict(self)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lag", "structure", "n_pairs"])
            for l, v, n in zip(self.lags, self.values, self.n_pairs):
                w.writerow([repr(float(l)), repr(float(v)), n])

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump({k: v for k, v in self.to_dict().items() if k not in ("values", "n_pairs")}, fh, indent=2)


def bandwidth_for_lags(lag_min: float) -> float:
    """Heat-kernel bandwidth h (a variance) with sqrt(h) = lag_min / 4."""
    return (lag_min / 4.0) ** 2


def _check_lags(lags: Sequence[float]) -> None:
    lags = sorted(set(lags))
    if len(lags) < MIN_LAGS:
        raise InsufficientDataError(f"need at least {MIN_LAGS} distinct lags, got {len(lags)}")
    if lags[0] <= 0 or lags[-1] / lags[0] < MIN_SPAN * (1 - 1e-9):
        raise InsufficientDataError("lags must be positive and span at least one decade")


def fit_power_law(lags: Sequence[float], values: Sequence[float], n_pairs: Sequence[int]) -> StructureFunctionFit:
    """Least squares of log S on log lag with a 95% t-interval on the slope."""
    lags = np.asarray(lags, dtype=float)
    values = np.asarray(values, dtype=float)
    if np.all(values == 0):
        raise InsufficientDataError("all increments are zero (degenerate field)")
    if np.any(values <= 0) or not np.all(np.isfinite(values)):
        raise InsufficientDataError("structure function has non-positive or non-finite entries")
    x, y = np.log(lags), np.log(values)
    res = stats.linregress(x, y)
    n = len(x)
    tq = stats.t.ppf(0.975, n - 2) if n > 2 else math.inf
    half = tq * res.stderr
    return StructureFunctionFit(
        lags=lags.tolist(), values=values.tolist(), n_pairs=[int(v) for v in n_pairs],
        slope=float(res.slope), slope_ci=(float(res.slope - half), float(res.slope + half)),
        exponent=float(res.slope / 2.0), r2=float(res.rvalue**2))


def _as_stack(fields) -> np.ndarray:
    """Replicate stack of shape (n_rep, *grid)."""
    if isinstance(fields, np.ndarray):
        return fields[None] if fields.ndim == 1 else fields
    return np.array([getattr(f, "values", f) for f in fields], dtype=float)


def spatial_structure(stack: np.ndarray, offsets: Sequence[int]) -> tuple[list, list]:
    """Mean squared increment at each integer node offset, along every grid axis."""
    vals, counts = [], []
    nd = stack.ndim - 1
    for k in offsets:
        total, count = 0.0, 0
        for ax in range(1, nd + 1):
            n = stack.shape[ax]
            if k >= n:
                raise InsufficientDataError(f"lag of {k} nodes exceeds the grid")
            a = np.take(stack, np.arange(k, n), axis=ax)
            b = np.take(stack, np.arange(0, n - k), axis=ax)
            diff = a - b
            total += float((diff * diff).sum())
            count += diff.size
        vals.append(total / count)
        counts.append(count)
    return vals, counts


def spatial_exponent(fields, lag_set: Sequence[float], step: float | None = None,
                     min_replicates: int = 1) -> StructureFunctionFit:
    """Fit over spatial lags; ``lag_set`` is in length units when ``step`` is given, else in nodes."""
    stack = _as_stack(fields)
    if stack.shape[0] < min_replicates:
        raise InsufficientDataError(f"need at least {min_replicates} replicates, got {stack.shape[0]}")
    if step is None:
        step = getattr(fields[0], "grid", None).step[0] if not isinstance(fields, np.ndarray) and hasattr(fields[0], "grid") else 1.0
    offsets = sorted({int(round(l / step)) for l in lag_set})
    if offsets and offsets[0] < 1:
        raise InsufficientDataError("lags must be at least one grid step")
    lags = [k * step for k in offsets]
    _check_lags(lags)
    vals, counts = spatial_structure(stack, offsets)
    return fit_power_law(lags, vals, counts)


def temporal_exponent(series: np.ndarray, times: Sequence[float], lag_set: Sequence[float],
                      t_min: float = 0.0, min_replicates: int = 1) -> StructureFunctionFit:
    """Fit over time lags at fixed nodes.

    ``series`` has shape (n_rep, n_times, *nodes) on uniformly spaced ``times``;
    only pairs with both times >= t_min enter, averaged over nodes and replicates.
    """
    arr = np.asarray(series, dtype=float)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.shape[0] < min_replicates:
        raise InsufficientDataError(f"need at least {min_replicates} replicates, got {arr.shape[0]}")
    times = np.asarray(times, dtype=float)
    dt = float(np.mean(np.diff(times)))
    if not np.allclose(np.diff(times), dt, rtol=1e-6, atol=1e-12):
        raise InsufficientDataError("times must be uniformly spaced")
    start = int(np.searchsorted(times, t_min - 1e-12))
    arr = arr[:, start:]
    offsets = sorted({int(round(l / dt)) for l in lag_set})
    if offsets[0] < 1:
        raise InsufficientDataError("time lags must be at least one frame")
    lags = [k * dt for k in offsets]
    _check_lags(lags)
    n_t = arr.shape[1]
    vals, counts = [], []
    for k in offsets:
        if k >= n_t:
            raise InsufficientDataError(f"time lag of {k} frames exceeds the window")
        diff = arr[:, k:] - arr[:, :-k]
        vals.append(float((diff * diff).mean()))
        counts.append(diff.size)
    return fit_power_law(lags, vals, counts)


def geometric_offsets(max_offset: int, n: int = 6) -> list:
    """Roughly log-spaced distinct integer offsets from 1 to max_offset."""
    raw = np.unique(np.round(np.geomspace(1, max_offset, n)).astype(int))
    return raw.tolist()


# ---------------------------------------------------------------------------
# calibration harness


def lipschitz_field(n_nodes: int = 64, length: float = 4.0) -> np.ndarray:
    return np.linspace(-length / 2, length / 2, n_nodes)[None, :]


def brownian_slices(n_rep: int, n_nodes: int, step: float, rng: np.random.Generator) -> np.ndarray:
    """Brownian paths sampled on a lattice: Hölder exponent 1/2."""
    inc = math.sqrt(step) * rng.standard_normal((n_rep, n_nodes))
    return np.cumsum(inc, axis=1)


def white_noise_fields(n_rep: int, n_nodes: int, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal((n_rep, n_nodes))


def calibrate(seed: int = 0, n_nodes: int = 64, n_rep: int = 200, tol: float = 0.1) -> dict:
    """Recover known exponents from synthetic fields before trusting simulation output."""
    rng = np.random.default_rng(seed)
    step = 4.0 / (n_nodes - 1)
    offsets = geometric_offsets(n_nodes // 4, 6)
    lags = [k * step for k in offsets]
    half = geometric_offsets(n_nodes // 4, 4)
    lags_half = [k * step for k in half]
    out = {}

    def record(name, fit, fit_half, target):
        out[name] = {
            "exponent": fit.exponent, "target": target, "r2": fit.r2,
            "exponent_half_lags": fit_half.exponent,
            "passed": abs(fit.exponent - target) <= tol,
            "stable": abs(fit.exponent - fit_half.exponent) < tol,
        }

    lip = lipschitz_field(n_nodes)
    record("lipschitz_space", spatial_exponent(lip, lags, step), spatial_exponent(lip, lags_half, step), 1.0)
    bm = brownian_slices(n_rep, n_nodes, step, rng)
    record("brownian_space", spatial_exponent(bm, lags, step), spatial_exponent(bm, lags_half, step), 0.5)
    times = np.arange(n_nodes) * step
    lin_t = np.repeat(times[None, :, None], 3, axis=2)
    record("linear_time", temporal_exponent(lin_t, times, lags), temporal_exponent(lin_t, times, lags_half), 1.0)
    bm_t = brownian_slices(n_rep, n_nodes, step, rng)[:, :, None]
    record("brownian_time", temporal_exponent(bm_t, times, lags), temporal_exponent(bm_t, times, lags_half), 0.5)
    wn = white_noise_fields(n_rep, n_nodes, rng)
    fit = spatial_exponent(wn, lags, step)
    out["white_noise_space"] = {"slope": fit.slope, "passed": abs(fit.slope) <= 2 * tol}
    const_t = np.ones((1, n_nodes, 3))
    try:
        temporal_exponent(const_t, times, lags)
        out["constant_time_degenerate"] = {"passed": False}
    except InsufficientDataError:
        out["constant_time_degenerate"] = {"passed": True}
    out["passed"] = all(v["passed"] for v in out.values() if isinstance(v, dict))
    out["stable"] = all(v.get("stable", True) for v in out.values() if isinstance(v, dict))
    return out
