# cython: language_level=3
"""Compiled hot kernels.

Every function here has a numpy twin in ``_fallback`` with the same signature
and the same floating-point contract (results agree to rounding).
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt, floor, ceil, M_PI

cnp.import_array()

NAME = "cython"

cdef enum:
    GAUSSIAN = 0
    EXPONENTIAL = 1


cdef inline double _stationary(int kind, double sigma2, double ell, double r2) nogil:
    if kind == GAUSSIAN:
        return sigma2 * exp(-0.5 * r2 / (ell * ell))
    return sigma2 * exp(-sqrt(r2) / ell)


def pivoted_cholesky(const double[:, ::1] pos, int kind, double sigma2, double ell,
                     double tol, int max_rank):
    """Greedy pivoted Cholesky of a stationary kernel matrix on ``pos``.

    Stops once the trace of the residual falls below ``tol * trace(G)``.
    Returns the (n, r) factor ``L`` with ``G ~= L @ L.T``.
    """
    cdef Py_ssize_t n = pos.shape[0], d = pos.shape[1]
    cdef Py_ssize_t i, j, k, p, c, r = 0
    if n == 0 or sigma2 <= 0.0:
        return np.zeros((n, 0))
    if max_rank > n:
        max_rank = <int>n
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Lbuf = np.empty((n, max_rank))
    cdef double[:, ::1] L = Lbuf
    cdef cnp.ndarray[cnp.float64_t, ndim=1] diag_arr = np.full(n, sigma2)
    cdef double[::1] diag = diag_arr
    cdef double trace = n * sigma2
    cdef double resid, best, lp, acc, r2, diff
    with nogil:
        for k in range(max_rank):
            resid = 0.0
            best = -1.0
            p = 0
            for i in range(n):
                resid += diag[i]
                if diag[i] > best:
                    best = diag[i]
                    p = i
            if resid <= tol * trace or best <= 0.0:
                break
            lp = sqrt(best)
            for i in range(n):
                r2 = 0.0
                for c in range(d):
                    diff = pos[i, c] - pos[p, c]
                    r2 += diff * diff
                acc = _stationary(kind, sigma2, ell, r2)
                for j in range(k):
                    acc -= L[i, j] * L[p, j]
                L[i, k] = acc / lp
            for i in range(n):
                diag[i] -= L[i, k] * L[i, k]
                if diag[i] < 0.0:
                    diag[i] = 0.0
            diag[p] = 0.0
            r = k + 1
    return np.ascontiguousarray(Lbuf[:, :r])


def ou_chain(const double[::1] xs_sorted, const double[::1] z, double sigma2, double ell):
    """Exact exponential-kernel field at sorted 1-d points (Markov recursion)."""
    cdef Py_ssize_t n = xs_sorted.shape[0], i
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    cdef double s = sqrt(sigma2), rho
    if n == 0:
        return out_arr
    with nogil:
        out[0] = s * z[0]
        for i in range(1, n):
            rho = exp(-(xs_sorted[i] - xs_sorted[i - 1]) / ell)
            out[i] = rho * out[i - 1] + s * sqrt(1.0 - rho * rho) * z[i]
    return out_arr


def heat_sum(const double[:, ::1] pos, const double[::1] a, double u):
    """Sum of p_u(x_i, a) over the rows of ``pos``."""
    cdef Py_ssize_t n = pos.shape[0], d = pos.shape[1], i, c
    cdef double total = 0.0, r2, diff
    cdef double norm = (2.0 * M_PI * u) ** (-0.5 * d)
    with nogil:
        for i in range(n):
            r2 = 0.0
            for c in range(d):
                diff = pos[i, c] - a[c]
                r2 += diff * diff
            total += exp(-0.5 * r2 / u)
    return norm * total


def density_accumulate(const double[:, ::1] pos, double weight, double h,
                       const double[::1] origin, const double[::1] step,
                       const long[::1] shape, double[::1] out, double cutoff):
    """Add ``weight * p_h(node, x_i)`` to every node of a uniform tensor grid.

    Only nodes within ``cutoff`` standard deviations of a particle are touched;
    the neglected Gaussian tail is below exp(-cutoff**2 / 2) relative.
    ``out`` is the C-ordered flattened grid.
    """
    cdef Py_ssize_t n = pos.shape[0], d = pos.shape[1]
    cdef Py_ssize_t i, c, j0, j1, j2
    cdef double reach = cutoff * sqrt(h)
    cdef double norm = weight * (2.0 * M_PI * h) ** (-0.5 * d)
    cdef long lo[3]
    cdef long hi[3]
    cdef double f0, f01, x, node
    cdef long stride1 = 1, stride0 = 1
    if d > 3:
        raise ValueError("density grids are limited to d <= 3")
    if d >= 2:
        stride0 = shape[1] * (shape[2] if d == 3 else 1)
    if d == 3:
        stride1 = shape[2]
    cdef long widest = 1
    for c in range(d):
        if shape[c] > widest:
            widest = shape[c]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] fac_arr = np.zeros((3, widest))
    cdef double[:, ::1] fac = fac_arr
    cdef bint empty
    with nogil:
        for i in range(n):
            empty = False
            for c in range(d):
                x = pos[i, c]
                lo[c] = <long>ceil((x - reach - origin[c]) / step[c])
                hi[c] = <long>floor((x + reach - origin[c]) / step[c])
                if lo[c] < 0:
                    lo[c] = 0
                if hi[c] > shape[c] - 1:
                    hi[c] = shape[c] - 1
                if hi[c] < lo[c]:
                    empty = True
                    break
                for j0 in range(lo[c], hi[c] + 1):
                    node = origin[c] + j0 * step[c]
                    fac[c, j0] = exp(-0.5 * (node - x) * (node - x) / h)
            if empty:
                continue
            if d == 1:
                for j0 in range(lo[0], hi[0] + 1):
                    out[j0] += norm * fac[0, j0]
            elif d == 2:
                for j0 in range(lo[0], hi[0] + 1):
                    f0 = norm * fac[0, j0]
                    for j1 in range(lo[1], hi[1] + 1):
                        out[j0 * stride0 + j1] += f0 * fac[1, j1]
            else:
                for j0 in range(lo[0], hi[0] + 1):
                    f0 = norm * fac[0, j0]
                    for j1 in range(lo[1], hi[1] + 1):
                        f01 = f0 * fac[1, j1]
                        for j2 in range(lo[2], hi[2] + 1):
                            out[j0 * stride0 + j1 * stride1 + j2] += f01 * fac[2, j2]
