"""Heat kernel, semigroup, resolvent and Green weights on R^d, d <= 3.

Points are numpy arrays: a single point has shape ``(d,)`` (a bare float is
accepted for d=1) and a batch has shape ``(n, d)``. Vectorized functions
return an array with one value per point; scalar inputs give floats.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import integrate, special

from .errors import DomainError, QuadratureError, UnsupportedFunctionError

QUAD_EPSABS = 1e-10
QUAD_EPSREL = 1e-8
QUAD_LIMIT = 20

SPHERE_AREA = {1: 2.0, 2: 2.0 * math.pi, 3: 4.0 * math.pi}

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


def check_dim(d: int) -> int:
    """Validate the spatial dimension; only d in {1, 2, 3} is supported."""
    if int(d) != d or d < 1:
        raise DomainError(f"dimension must be a positive integer, got {d!r}")
    if d > 3:
        raise DomainError(
            f"d={d} is not supported: for d >= 4 the occupation measure is singular "
            "with respect to Lebesgue measure, so no density exists"
        )
    return int(d)


def as_points(x, d: int) -> np.ndarray:
    """Coerce ``x`` to a float array of shape (n, d)."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        if d != 1:
            raise DomainError(f"scalar point given for d={d}")
        return arr.reshape(1, 1)
    if arr.ndim == 1:
        if d == 1 and arr.shape[0] != 1:
            return arr.reshape(-1, 1)
        if arr.shape[0] != d:
            raise DomainError(f"point of length {arr.shape[0]} given for d={d}")
        return arr.reshape(1, d)
    if arr.shape[1] != d:
        raise DomainError(f"points of dimension {arr.shape[1]} given for d={d}")
    return arr


def as_point(a, d: int) -> np.ndarray:
    arr = np.asarray(a, dtype=float).reshape(-1)
    if arr.shape[0] != d:
        raise DomainError(f"point of length {arr.shape[0]} given for d={d}")
    return arr


def _finish(values: np.ndarray, single: bool):
    return float(values[0]) if single else values


def _quad(f, a, b, what: str, **kw) -> float:
    kw.setdefault("epsabs", QUAD_EPSABS)
    kw.setdefault("epsrel", QUAD_EPSREL)
    kw.setdefault("limit", QUAD_LIMIT)
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(f, a, b, **kw)
        except integrate.IntegrationWarning as exc:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", integrate.IntegrationWarning)
                val, err = integrate.quad(f, a, b, **kw)
            if err > max(kw["epsabs"], kw["epsrel"] * abs(val)) * 100:
                raise QuadratureError(f"{what}: {exc}", achieved=err) from None
    return val


# ---------------------------------------------------------------------------
# heat kernel and test functions


def heat_density(t, r2, d: int):
    """p_t evaluated at squared distance ``r2`` (broadcasting)."""
    t = np.asarray(t, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    # log space: the prefactor overflows for subnormal t while the exponential underflows
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        expo = np.where(r2 > 0, -0.5 * r2 / t, 0.0)
        return np.exp(-0.5 * d * np.log(2.0 * np.pi * t) + expo)


def heat_kernel(t: float, x, y, d: int):
    """Transition density (2 pi t)^{-d/2} exp(-|y-x|^2 / 2t) of Brownian motion."""
    check_dim(d)
    if not t > 0:
        raise DomainError(f"heat kernel needs t > 0, got {t}")
    xs, ys = as_points(x, d), as_points(y, d)
    r2 = ((xs - ys) ** 2).sum(axis=1)
    single = np.ndim(x) <= 1 and np.ndim(y) <= 1 and len(r2) == 1
    return _finish(heat_density(t, r2, d), single)


@dataclass(frozen=True)
class GaussianBump:
    """The heat kernel p_h^a(x) = p_h(a, x) as a test function."""

    center: tuple
    h: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        if not self.h > 0:
            raise DomainError("GaussianBump bandwidth h must be > 0")

    @property
    def dim(self) -> int:
        return len(self.center)

    def __call__(self, x) -> np.ndarray:
        pts = as_points(x, self.dim)
        r2 = ((pts - np.asarray(self.center)) ** 2).sum(axis=1)
        return heat_density(self.h, r2, self.dim)

    def half_laplacian(self, x) -> np.ndarray:
        # (Delta/2) p_h = d/dh p_h
        pts = as_points(x, self.dim)
        r2 = ((pts - np.asarray(self.center)) ** 2).sum(axis=1)
        return heat_density(self.h, r2, self.dim) * (r2 / self.h - self.dim) / (2.0 * self.h)


@dataclass(frozen=True)
class Constant:
    c: float = 1.0

    def __post_init__(self):
        if self.c < 0:
            raise DomainError("Constant test function must be nonnegative")

    dim = None

    def __call__(self, x) -> np.ndarray:
        # a 1-d array is read as a batch of 1-d points
        arr = np.asarray(x, dtype=float)
        n = 1 if arr.ndim == 0 else arr.shape[0]
        return np.full(n, float(self.c))

    def half_laplacian(self, x) -> np.ndarray:
        return self(x) * 0.0


@dataclass(frozen=True)
class PowerLaw:
    """|a - x|^{-gamma} with 0 < gamma < d."""

    center: tuple
    gamma: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        if not 0 < self.gamma < self.dim:
            raise DomainError(f"PowerLaw exponent must lie in (0, d={self.dim})")

    @property
    def dim(self) -> int:
        return len(self.center)

    def __call__(self, x) -> np.ndarray:
        pts = as_points(x, self.dim)
        r = np.sqrt(((pts - np.asarray(self.center)) ** 2).sum(axis=1))
        with np.errstate(divide="ignore"):
            return r ** (-self.gamma)

    def half_laplacian(self, x):
        raise UnsupportedFunctionError("PowerLaw test functions are not twice differentiable")


TestFunction = Union[GaussianBump, Constant, PowerLaw]


# ---------------------------------------------------------------------------
# semigroup P_t and potential operator Q_t


def gaussian_time_integral(u0, u1, r, d: int):
    """Closed form of int_{u0}^{u1} p_u(r) du for 0 <= u0 <= u1 (broadcasting)."""
    u0, u1, r = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (u0, u1, r)))
    out = np.zeros(u0.shape)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if d == 1:
            def F(u):
                return np.where(
                    u > 0,
                    np.sqrt(2.0 * u / np.pi) * np.exp(-0.5 * r * r / np.where(u > 0, u, 1.0))
                    - r * special.erfc(r / np.sqrt(2.0 * np.where(u > 0, u, 1.0))),
                    0.0,
                )

            out = F(u1) - F(u0)
        elif d == 2:
            pos = r > 0
            a = 0.5 * r * r
            e0 = np.where(u0 > 0, special.exp1(a / np.where(u0 > 0, u0, 1.0)), 0.0)
            e1 = special.exp1(a / u1)
            out = np.where(pos, (e1 - e0) / (2.0 * np.pi), np.log(u1 / u0) / (2.0 * np.pi))
        else:
            c0 = 1.0 / np.sqrt(2.0 * np.where(u0 > 0, u0, np.inf))
            c1 = 1.0 / np.sqrt(2.0 * u1)
            b0, b1 = r * c0, r * c1
            big = np.where(u0 > 0, special.erf(b0), 1.0) - special.erf(b1)
            main = big / (2.0 * np.pi * np.where(r > 0, r, 1.0))
            # series for small r avoids cancellation in erf(b0) - erf(b1)
            series = (2.0 / math.sqrt(math.pi)) * (
                (c0 - c1) - r * r * (c0**3 - c1**3) / 3.0 + r**4 * (c0**5 - c1**5) / 10.0
            ) / (2.0 * np.pi)
            out = np.where(b0 < 1e-3, series, main)
        out = np.where(u1 > u0, out, 0.0)
    return out


def _powerlaw_semigroup_at(t: float, gamma: float, z: float, d: int) -> float:
    """P_t |.|^{-gamma} at distance z from the centre, by radial quadrature."""
    if z == 0.0:
        return powerlaw_semigroup_at_center(t, gamma, d)
    k = d - gamma

    def angular(r):
        if d == 1:
            return heat_density(t, (z - r) ** 2, 1) + heat_density(t, (z + r) ** 2, 1)
        if d == 2:
            return (1.0 / t) * math.exp(-((z - r) ** 2) / (2 * t)) * special.i0e(z * r / t)
        # d == 3
        return (
            (2 * math.pi * t) ** -1.5 * 4 * math.pi * t / (2 * z * r)
            * (math.exp(-((z - r) ** 2) / (2 * t)) - math.exp(-((z + r) ** 2) / (2 * t)))
            if r > 0
            else (2 * math.pi * t) ** -1.5 * 4 * math.pi
        )

    # r = s^{1/k} turns r^{d-1-gamma} dr into ds / k
    def integrand(s):
        return angular(s ** (1.0 / k)) / k

    s_peak = z**k
    s_max = (z + 14.0 * math.sqrt(t)) ** k
    scale = z ** (-gamma)
    lo = max(z - 14.0 * math.sqrt(t), 0.0) ** k
    total = 0.0
    if lo > 0:
        total += _quad(integrand, 0.0, lo, "power-law semigroup", epsabs=QUAD_EPSABS * 1e-2 * scale)
    total += _quad(integrand, lo, s_max, "power-law semigroup", points=[s_peak],
                   epsabs=QUAD_EPSABS * 1e-2 * scale)
    return total


def powerlaw_semigroup_at_center(t: float, gamma: float, d: int) -> float:
    """Closed form of P_t |.|^{-gamma} at the singular centre."""
    k = d - gamma
    return (2 * math.pi * t) ** (-d / 2) * SPHERE_AREA[d] * 0.5 * (2 * t) ** (k / 2) * math.gamma(k / 2)


def semigroup_apply(t: float, phi: TestFunction, x, d: int | None = None):
    """P_t phi at the point(s) ``x``."""
    d = d or phi.dim or 1
    check_dim(d)
    if t < 0:
        raise DomainError("semigroup time must be >= 0")
    pts = as_points(x, d)
    single = np.ndim(x) <= 1 and pts.shape[0] == 1
    if t == 0:
        return _finish(np.asarray(phi(pts), dtype=float), single)
    if isinstance(phi, Constant):
        vals = np.full(pts.shape[0], float(phi.c))
    elif isinstance(phi, GaussianBump):
        r2 = ((pts - np.asarray(phi.center)) ** 2).sum(axis=1)
        vals = heat_density(t + phi.h, r2, d)
    elif isinstance(phi, PowerLaw):
        z = np.sqrt(((pts - np.asarray(phi.center)) ** 2).sum(axis=1))
        vals = np.array([_powerlaw_semigroup_at(t, phi.gamma, float(zi), d) for zi in z])
    else:
        raise UnsupportedFunctionError(f"unknown test function {phi!r}")
    return _finish(vals, single)


def time_integrated_semigroup(s0, s1, phi: TestFunction, x, d: int | None = None):
    """int_{s0}^{s1} P_r phi(x) dr, vectorized over points and (broadcast) times."""
    d = d or phi.dim or 1
    pts = as_points(x, d)
    s0 = np.asarray(s0, dtype=float)
    s1 = np.asarray(s1, dtype=float)
    if isinstance(phi, Constant):
        return phi.c * np.broadcast_to(np.maximum(s1 - s0, 0.0), np.broadcast(s0, s1, pts[:, 0]).shape).copy()
    if isinstance(phi, GaussianBump):
        r = np.sqrt(((pts - np.asarray(phi.center)) ** 2).sum(axis=1))
        return gaussian_time_integral(s0 + phi.h, s1 + phi.h, r, d)
    raise UnsupportedFunctionError("closed-form time integrals need a GaussianBump or Constant")


def q_operator(t: float, phi: TestFunction, x, d: int | None = None):
    """Q_t phi(x) = int_0^t P_s phi(x) ds."""
    d = d or phi.dim or 1
    check_dim(d)
    if t < 0:
        raise DomainError("Q_t needs t >= 0")
    pts = as_points(x, d)
    single = np.ndim(x) <= 1 and pts.shape[0] == 1
    if t == 0:
        return _finish(np.zeros(pts.shape[0]), single)
    if isinstance(phi, (Constant, GaussianBump)):
        return _finish(time_integrated_semigroup(0.0, t, phi, pts, d), single)
    if isinstance(phi, PowerLaw):
        z = np.sqrt(((pts - np.asarray(phi.center)) ** 2).sum(axis=1))
        vals = []
        for zi in z:
            if zi == 0.0:
                if phi.gamma >= 2:
                    raise DomainError("Q_t |x-a|^{-gamma} diverges at x=a for gamma >= 2")
                c0 = powerlaw_semigroup_at_center(1.0, phi.gamma, d)
                vals.append(c0 * t ** (1 - phi.gamma / 2) / (1 - phi.gamma / 2))
            else:
                vals.append(_quad(lambda s: _powerlaw_semigroup_at(s, phi.gamma, float(zi), d) if s > 0 else zi ** -phi.gamma,
                                  0.0, t, "Q_t power law", limit=50))
        return _finish(np.array(vals), single)
    raise UnsupportedFunctionError(f"unknown test function {phi!r}")


def q_operator_quadrature(t: float, phi: TestFunction, x, d: int | None = None) -> float:
    """Q_t phi at a single point by direct time quadrature of P_s phi (oracle route)."""
    d = d or phi.dim or 1
    if t == 0:
        return 0.0
    return _quad(lambda s: semigroup_apply(s, phi, x, d), 0.0, t, "Q_t quadrature",
                 epsabs=1e-12, epsrel=1e-10, limit=100)


# ---------------------------------------------------------------------------
# resolvent / Green functions


@dataclass(frozen=True)
class ResolventSpec:
    """g_{alpha,eps}^a(y) = int_0^inf exp(-alpha t) p_{t+eps}^a(y) dt."""

    alpha: float
    center: tuple
    eps: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        if self.alpha < 0:
            raise DomainError("resolvent rate alpha must be >= 0")
        if self.eps < 0:
            raise DomainError("mollifier eps must be >= 0")

    @property
    def dim(self) -> int:
        return len(self.center)

    def validate(self, d: int | None = None) -> None:
        d = d or self.dim
        check_dim(d)
        if d <= 2 and self.alpha == 0 and self.eps > 0:
            raise DomainError("alpha > 0 is required when d <= 2")

    def __call__(self, y) -> np.ndarray:
        return resolvent_values(self, y)

    def half_laplacian(self, y) -> np.ndarray:
        # (Delta/2) g_{a,eps} = alpha g_{a,eps} - p_eps^a ; needs eps > 0
        if self.eps <= 0:
            raise DomainError("the Laplacian identity is used only for eps > 0")
        d = self.dim
        pts = as_points(y, d)
        r2 = ((pts - np.asarray(self.center)) ** 2).sum(axis=1)
        return self.alpha * resolvent_values(self, pts) - heat_density(self.eps, r2, d)

    def shifted(self, s: float) -> "ResolventSpec":
        """P_s g_{alpha,eps} as a spec: it equals g_{alpha,eps+s}."""
        return ResolventSpec(self.alpha, self.center, self.eps + s)


def _resolvent_d1(alpha, eps, r):
    k = math.sqrt(2.0 * alpha)
    if eps == 0:
        return np.exp(-k * r) / k
    b = r / math.sqrt(2.0 * eps)
    c = math.sqrt(alpha * eps)
    cb = c - b
    with np.errstate(over="ignore"):
        first = np.where(
            cb >= 0,
            np.exp(-b * b) * special.erfcx(np.maximum(cb, 0.0)),
            np.exp(c * c - k * r) * special.erfc(cb),
        )
    second = np.exp(-b * b) * special.erfcx(b + c)
    return (first + second) / (2.0 * k)


def _resolvent_d3(alpha, eps, r):
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if alpha == 0:
            if eps == 0:
                return 1.0 / (2.0 * np.pi * r)
            b = r / math.sqrt(2.0 * eps)
            series = (2.0 / math.sqrt(math.pi)) * (1.0 - b * b / 3.0 + b**4 / 10.0) / (
                2.0 * np.pi * math.sqrt(2.0 * eps))
            main = special.erf(b) / (2.0 * np.pi * np.where(r > 0, r, 1.0))
            return np.where(b < 1e-3, series, main)
        k = math.sqrt(2.0 * alpha)
        if eps == 0:
            return np.exp(-k * r) / (2.0 * np.pi * r)
        b = r / math.sqrt(2.0 * eps)
        c = math.sqrt(alpha * eps)
        cb = c - b
        first = np.where(
            cb >= 0,
            np.exp(-b * b) * special.erfcx(np.maximum(cb, 0.0)),
            np.exp(c * c - k * r) * special.erfc(cb),
        )
        second = np.exp(-b * b) * special.erfcx(b + c)
        main = (first - second) / (4.0 * np.pi * np.where(r > 0, r, 1.0))
        at0 = (2 * np.pi) ** -1.5 * (
            2.0 / math.sqrt(eps) - 2.0 * math.sqrt(math.pi * alpha) * math.exp(alpha * eps) * special.erfc(c))
        return np.where(b < 1e-5, at0, main)


def _resolvent_d2_fixed(alpha, eps, r):
    """d=2 resolvent by composite Gauss-Legendre in u = log t (vectorized)."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if eps == 0 and np.any(r == 0):
        raise DomainError("unmollified d=2 resolvent is singular at its centre")
    upper = math.log(60.0 / alpha)
    with np.errstate(divide="ignore"):
        lower_tail = np.log(np.where(r > 0, r * r / 120.0, 0.0))
    lower = np.maximum(lower_tail, math.log(eps)) if eps > 0 else lower_tail
    lower = np.minimum(lower, upper)
    panels = 96
    width = (upper - lower) / panels
    out = np.zeros_like(r)
    half = 0.5 * width
    pref = math.exp(alpha * eps) / (2.0 * np.pi)
    for j in range(panels):
        mid = lower + (j + 0.5) * width
        u = mid[:, None] + half[:, None] * _GL_NODES[None, :]
        vals = np.exp(-alpha * np.exp(u) - 0.5 * (r * r)[:, None] * np.exp(-u))
        out += half * (vals @ _GL_WEIGHTS)
    return pref * out


def resolvent_quadrature(alpha: float, eps: float, r: float, d: int, **kw) -> float:
    """g_{alpha,eps} at distance r by adaptive quadrature of the Laplace integral.

    Uses u = log t so both the small-t and large-t ends become smooth tails.
    """
    if d <= 2 and alpha == 0:
        raise DomainError("alpha > 0 is required when d <= 2")
    if eps == 0 and r == 0 and d >= 2:
        raise DomainError("unmollified resolvent is singular at its centre")
    pref = math.exp(alpha * eps)

    def f(u):
        t = math.exp(u)
        return pref * t * math.exp(-alpha * t) * heat_density(t, r * r, d)

    upper = math.log(60.0 / alpha) if alpha > 0 else math.log(1e16)
    lower = math.log(eps) if eps > 0 else math.log(max(r * r, 1e-300) / 120.0)
    if d == 1 and eps == 0 and r == 0:
        lower = math.log(1e-30)
    kw.setdefault("limit", 100)
    val = _quad(f, lower, upper, "resolvent quadrature", **kw)
    if alpha == 0 and d == 3:
        # tail beyond the cut-off, int_T^inf (2 pi t)^{-3/2} dt
        T = math.exp(upper)
        val += pref * (2 * math.pi) ** -1.5 * 2.0 / math.sqrt(T)
    return val


def green_g0(center, y, d: int):
    """The alpha=0 Green weights: 1 (d=1), 1+log+(1/|y-a|) (d=2), 1/(2 pi |y-a|) (d=3)."""
    check_dim(d)
    pts = as_points(y, d)
    single = np.ndim(y) <= 1 and pts.shape[0] == 1
    r = np.sqrt(((pts - as_point(center, d)) ** 2).sum(axis=1))
    if d == 1:
        vals = np.ones_like(r)
    else:
        if np.any(r == 0):
            raise DomainError("g_0 is singular at its centre")
        vals = 1.0 + np.maximum(-np.log(r), 0.0) if d == 2 else 1.0 / (2.0 * np.pi * r)
    return _finish(vals, single)


def resolvent_values(spec: ResolventSpec, y) -> np.ndarray:
    """Vectorized g_{alpha,eps}^a at the rows of ``y``."""
    d = spec.dim
    spec.validate(d)
    pts = as_points(y, d)
    r = np.sqrt(((pts - np.asarray(spec.center)) ** 2).sum(axis=1))
    if spec.alpha == 0 and spec.eps == 0 and d <= 2:
        return green_g0(spec.center, pts, d)
    if spec.eps == 0 and d >= 2 and np.any(r == 0):
        raise DomainError("unmollified resolvent is singular at its centre")
    if d == 1:
        return _resolvent_d1(spec.alpha, spec.eps, r)
    if d == 3:
        return _resolvent_d3(spec.alpha, spec.eps, r)
    return _resolvent_d2_fixed(spec.alpha, spec.eps, r)


def resolvent(spec: ResolventSpec, y, d: int | None = None):
    """g_{alpha,eps}^a(y); closed forms in d=1,3, Laplace quadrature in d=2.

    With alpha=0 and eps=0 in d <= 2 the Green weights g_0 are returned.
    """
    d = d or spec.dim
    if d != spec.dim:
        raise DomainError("dimension mismatch between spec centre and d")
    spec.validate(d)
    pts = as_points(y, d)
    single = np.ndim(y) <= 1 and pts.shape[0] == 1
    if d == 2 and not (spec.alpha == 0 and spec.eps == 0):
        r = np.sqrt(((pts - np.asarray(spec.center)) ** 2).sum(axis=1))
        vals = np.array([resolvent_quadrature(spec.alpha, spec.eps, float(ri), 2) for ri in r])
        return _finish(vals, single)
    return _finish(resolvent_values(spec, pts), single)


def green_weight_gd(x, d: int):
    """g_d(x): 1 (d=1), log+(1/|x|) (d=2), 1/|x| (d=3)."""
    check_dim(d)
    pts = as_points(x, d)
    single = np.ndim(x) <= 1 and pts.shape[0] == 1
    r = np.sqrt((pts**2).sum(axis=1))
    if d == 1:
        vals = np.ones_like(r)
    elif d == 2:
        if np.any(r == 0):
            raise DomainError("g_2 is singular at the origin")
        vals = np.maximum(-np.log(r), 0.0)
    else:
        if np.any(r == 0):
            raise DomainError("g_3 is singular at the origin")
        vals = 1.0 / r
    return _finish(vals, single)


def mollified_resolvent_identity_residual(spec: ResolventSpec, y, fd_step: float) -> float:
    """|(Delta/2) g_{alpha,eps} - (alpha g_{alpha,eps} - p_eps)| at y.

    The Laplacian is taken by second-order central differences of step
    ``fd_step``, so the residual is the finite-difference truncation error.
    """
    if not spec.eps > 0:
        raise DomainError("the mollified identity needs eps > 0")
    d = spec.dim
    spec.validate(d)
    y0 = as_point(y, d)
    pts = [y0]
    for i in range(d):
        e = np.zeros(d)
        e[i] = fd_step
        pts += [y0 + e, y0 - e]
    vals = resolvent_values(spec, np.array(pts))
    lap = sum(vals[1 + 2 * i] - 2 * vals[0] + vals[2 + 2 * i] for i in range(d)) / fd_step**2
    rhs = spec.alpha * vals[0] - heat_density(spec.eps, ((y0 - np.asarray(spec.center)) ** 2).sum(), d)
    return float(abs(0.5 * lap - rhs))


def shifted_resolvent_direct(alpha: float, a, s: float, x, d: int) -> float:
    """P_s g_alpha^a(x) by direct quadrature over the Laplace variable (oracle route)."""
    r2 = float(((as_point(x, d) - as_point(a, d)) ** 2).sum())
    return _quad(lambda t: math.exp(-alpha * t) * float(heat_density(t + s, r2, d)), 0.0, np.inf,
                 "P_s g_alpha", epsabs=1e-12, epsrel=1e-10, limit=200)
