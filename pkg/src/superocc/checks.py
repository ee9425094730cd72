"""Kernel self-test and numerical checks of the heat-kernel inequalities.

Each inequality is evaluated on a scrambled Halton design: the left side by
quadrature, the right side by formula. The fitted constant is the largest
observed LHS/RHS ratio. Designs of size n and 2n are nested (the first n
points coincide), so doubling the sample count can only raise the fit.
"""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass

import numpy as np
from scipy import special
from scipy.stats import qmc

from . import kernels as K
from .errors import QuadratureError


@dataclass
class BoundReport:
    name: str
    n_samples: int
    constant_n: float
    constant_2n: float
    drift: float
    finite: bool
    failures: int
    note: str = ""

    @property
    def stable(self) -> bool:
        return self.finite and self.drift < 0.10

    def to_dict(self) -> dict:
        out = asdict(self)
        out["stable"] = self.stable
        return out


def _design(seed: int, n: int, dims: int, salt: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(salt,)))
    return qmc.Halton(d=dims, scramble=True, seed=rng).random(n)


def _fit(name: str, ratios: list, n: int, note: str = "") -> BoundReport:
    vals = np.array([r for r in ratios if r is not None], dtype=float)
    failures = sum(r is None for r in ratios)
    first = np.array([r for r in ratios[:n] if r is not None], dtype=float)
    c_n = float(first.max()) if first.size else math.nan
    c_2n = float(vals.max()) if vals.size else math.nan
    finite = bool(np.isfinite(c_n) and np.isfinite(c_2n))
    drift = abs(c_2n - c_n) / c_n if finite and c_n > 0 else math.inf
    return BoundReport(name, n, c_n, c_2n, drift, finite, failures, note)


# -- individual bounds -------------------------------------------------------


def powerlaw_smoothing_ratio(d: int, gamma: float, t: float, rho: float) -> float:
    """Q_t |.-z|^{-gamma}(x) / t^{1-gamma/2} with |x-z| = rho * sqrt(t)."""
    x = np.zeros(d)
    x[0] = rho * math.sqrt(t)
    lhs = K.q_operator(t, K.PowerLaw(tuple(np.zeros(d)), gamma), x, d)
    return lhs / t ** (1.0 - gamma / 2.0)


def resolvent_holder_ratio(alpha: float, gamma: float, delta: float) -> float:
    """|g_alpha^a(a) - g_alpha^b(a)| / |a-b|^gamma in d=1, both values by quadrature.

    x = a is where the difference of the two translates peaks.
    """
    ga = K.resolvent_quadrature(alpha, 0.0, 0.0, 1)
    gb = K.resolvent_quadrature(alpha, 0.0, delta, 1)
    return abs(ga - gb) / delta**gamma


def time_difference_ratio(d: int, s: float, t: float, r: float, dtil: float) -> float:
    """|p_t(0,x) - p_s(0,x)| over [(t-s) s^{-d/2-1}]^dtil (p_t^{1-dtil} + p_s^{1-dtil})."""
    r2 = r * r

    def dp(u):
        return float(K.heat_density(u, r2, d)) * (r2 / (2 * u * u) - d / (2 * u))

    lhs = abs(K._quad(dp, s, t, "time-difference", epsabs=1e-14, epsrel=1e-10, limit=50)) if t > s else 0.0
    pt, ps = float(K.heat_density(t, r2, d)), float(K.heat_density(s, r2, d))
    rhs = ((t - s) * s ** (-d / 2 - 1)) ** dtil * (pt ** (1 - dtil) + ps ** (1 - dtil))
    if rhs == 0.0:
        return 0.0 if lhs == 0.0 else math.inf
    return lhs / rhs


def product_ratio(d: int, s: float, t: float, r: float) -> float:
    """p_t^x(v) p_s^x(v) / [(st)^{-d/4} p_{ts/(t+s)}^x(v)]."""
    r2 = r * r
    lhs = float(K.heat_density(t, r2, d) * K.heat_density(s, r2, d))
    rhs = (s * t) ** (-d / 4) * float(K.heat_density(t * s / (t + s), r2, d))
    return lhs / rhs


def _collect(f, rows):
    out = []
    for row in rows:
        try:
            val = f(*row)
        except QuadratureError:
            val = None
        out.append(val)
    return out


def bound_check_suite(seed: int = 0, n_samples: int = 100, d_powerlaw: int = 2,
                      gamma_powerlaw: float = 0.5) -> dict:
    """Fit the constants of the four appendix inequalities on n and 2n samples."""
    n2 = 2 * n_samples
    reports = {}

    u = _design(seed, n2, 2, 1)
    rows = [(d_powerlaw, gamma_powerlaw, 0.05 + 1.95 * a, 3.0 * b) for a, b in u]
    reports["powerlaw_smoothing"] = _fit(
        "powerlaw_smoothing", _collect(powerlaw_smoothing_ratio, rows), n_samples,
        f"d={d_powerlaw}, gamma={gamma_powerlaw}; Q_t |.-z|^-gamma <= C t^(1-gamma/2)")

    u = _design(seed, n2, 3, 2)
    rows = [(0.5 + 1.5 * a, 0.05 + 0.9 * b, 1e-3 + (1 - 1e-3) * c) for a, b, c in u]
    reports["resolvent_holder"] = _fit(
        "resolvent_holder", _collect(resolvent_holder_ratio, rows), n_samples,
        "d=1, |a-b| <= 1; |g_alpha^a - g_alpha^b| <= C |a-b|^gamma")

    u = _design(seed, n2, 5, 3)
    rows = []
    for a, b, c, e, f in u:
        d = 1 + min(int(3 * a), 2)
        s = 0.05 + 0.95 * b
        t = s * (1.0 + c)
        rows.append((d, s, t, 3.0 * math.sqrt(t) * e, 0.05 + 0.95 * f))
    reports["time_difference"] = _fit(
        "time_difference", _collect(time_difference_ratio, rows), n_samples,
        "s < t <= 2s; constant multiplying [(t-s)s^(-d/2-1)]^dtil (p_t^(1-dtil)+p_s^(1-dtil))")

    u = _design(seed, n2, 4, 4)
    rows = []
    for a, b, c, e in u:
        d = 1 + min(int(3 * a), 2)
        rows.append((d, 0.01 + 1.99 * b, 0.01 + 1.99 * c, 3.0 * e))
    reports["product_bound"] = _fit(
        "product_bound", _collect(product_ratio, rows), n_samples,
        "p_t p_s <= C (st)^(-d/4) p_(ts/(t+s)); exact sup is (4 pi)^(-d/2) at s=t")
    return reports


# -- kernel self-test --------------------------------------------------------


@dataclass
class Check:
    name: str
    value: float
    target: float
    tol: float
    passed: bool
    detail: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def _abs_check(name, value, target, tol, detail=""):
    value, target = float(value), float(target)
    return Check(name, value, target, tol, bool(abs(value - target) <= tol), detail)


def _normalization(t, x, d) -> float:
    # integral of p_t(x, .) over R^d in polar coordinates about x
    f = lambda r: K.SPHERE_AREA[d] * r ** (d - 1) * float(K.heat_density(t, r * r, d))
    return K._quad(f, 0.0, 40.0 * math.sqrt(t), "normalization", epsabs=1e-12, limit=100)


def _chapman_kolmogorov(s, t, x, y) -> float:
    f = lambda z: float(K.heat_density(s, (z - x) ** 2, 1) * K.heat_density(t, (y - z) ** 2, 1))
    w = 40.0 * math.sqrt(s + t)
    return K._quad(f, min(x, y) - w, max(x, y) + w, "Chapman-Kolmogorov", epsabs=1e-12, limit=200)


def laplacian_ratios(spec: K.ResolventSpec, y, steps=(0.1, 0.05, 0.025, 0.0125)) -> list:
    res = [K.mollified_resolvent_identity_residual(spec, y, h) for h in steps]
    return [res[i] / res[i + 1] for i in range(len(res) - 1)], res


def kernel_selftest(seed: int = 0, tol: float = 1e-6) -> dict:
    """Run the kernel identity checks; every entry must pass at ``tol``."""
    started = time.perf_counter()
    rng = np.random.default_rng(seed)
    checks: list[Check] = []

    for d in (1, 2, 3):
        for _ in range(3):
            t = float(rng.uniform(0.05, 3.0))
            val = _normalization(t, 0.0, d)
            checks.append(_abs_check(f"normalization d={d} t={t:.4g}", val, 1.0, tol))

    for _ in range(4):
        s, t = rng.uniform(0.05, 2.0, size=2)
        x, y = rng.uniform(-2, 2, size=2)
        val = _chapman_kolmogorov(s, t, x, y)
        checks.append(_abs_check(f"chapman-kolmogorov s={s:.3g} t={t:.3g}", val,
                                 K.heat_kernel(s + t, x, y, 1), tol))
    # the bump path uses the identity P_t p_h = p_{t+h} directly
    checks.append(_abs_check("semigroup bump p_{0.5+0.5}(0,0)",
                             K.semigroup_apply(0.5, K.GaussianBump(0.0, 0.5), 0.0, 1),
                             K.heat_kernel(1.0, 0.0, 0.0, 1), 1e-15))

    for d in (1, 3):
        for alpha in (0.5, 1.0, 2.0):
            for eps in (0.0, 0.1):
                for r in (0.05, 0.5, 1.5):
                    y = np.zeros(d)
                    y[0] = r
                    closed = K.resolvent(K.ResolventSpec(alpha, tuple(np.zeros(d)), eps), y, d)
                    quad = K.resolvent_quadrature(alpha, eps, r, d)
                    checks.append(_abs_check(
                        f"resolvent d={d} alpha={alpha} eps={eps} r={r}", closed, quad, tol))
    for alpha in (0.5, 1.0, 2.0):
        for r in (0.05, 0.5, 1.5):
            quad = K.resolvent((K.ResolventSpec(alpha, (0.0, 0.0))), [r, 0.0], 2)
            bessel = special.k0(math.sqrt(2 * alpha) * r) / math.pi
            checks.append(_abs_check(f"resolvent d=2 alpha={alpha} r={r} vs K0", quad, bessel, tol))
            fast = K.resolvent_values(K.ResolventSpec(alpha, (0.0, 0.0)), np.array([[r, 0.0]]))[0]
            checks.append(_abs_check(f"resolvent d=2 vectorized alpha={alpha} r={r}", fast, bessel, tol))
    checks.append(_abs_check("g_0 d=3 at |y|=1", K.resolvent(K.ResolventSpec(0, (0, 0, 0)), [1, 0, 0], 3),
                             1.0 / (2 * math.pi), tol))
    checks.append(_abs_check("g_1 d=1 at y=a", K.resolvent(K.ResolventSpec(1, (0.0,)), 0.0, 1),
                             K.resolvent_quadrature(1.0, 0.0, 0.0, 1), tol))

    cases = [
        (K.ResolventSpec(1.0, (0.0,), 0.1), [0.3]),
        (K.ResolventSpec(0.5, (0.0, 0.0), 0.2), [1.0, 0.0]),
        (K.ResolventSpec(0.5, (0.0, 0.0, 0.0), 0.2), [1.0, 0.0, 0.0]),
    ]
    for spec, y in cases:
        ratios, res = laplacian_ratios(spec, y)
        worst = min(ratios)
        checks.append(Check(f"laplacian identity O(h^2) d={spec.dim}", worst, 4.0, 0.5, worst >= 3.5,
                            "ratios " + ", ".join(f"{r:.3f}" for r in ratios)))

    elapsed = time.perf_counter() - started
    return {
        "passed": all(c.passed for c in checks),
        "n_checks": len(checks),
        "elapsed_s": elapsed,
        "checks": [c.to_dict() for c in checks],
    }
