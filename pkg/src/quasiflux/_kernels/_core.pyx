# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: tridiagonal elimination and Jacobi-PCG on the 5-point flux stencil."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt, INFINITY

cnp.import_array()


def tridiag_solve(double[::1] sub, double[::1] diag, double[::1] sup, double[::1] rhs):
    """Thomas elimination; ``sub``/``sup`` have length m-1. No pivoting (M-matrix input)."""
    cdef Py_ssize_t m = diag.shape[0]
    cdef Py_ssize_t i
    cdef double w
    out = np.empty(m)
    cdef double[::1] x = out
    cdef double[::1] cp = np.empty(m)
    cdef double[::1] dp = np.empty(m)
    if diag[0] == 0.0:
        raise ZeroDivisionError("zero pivot in tridiagonal solve")
    cp[0] = sup[0] / diag[0] if m > 1 else 0.0
    dp[0] = rhs[0] / diag[0]
    for i in range(1, m):
        w = diag[i] - sub[i - 1] * cp[i - 1]
        if w == 0.0:
            raise ZeroDivisionError("zero pivot in tridiagonal solve")
        if i < m - 1:
            cp[i] = sup[i] / w
        dp[i] = (rhs[i] - sub[i - 1] * dp[i - 1]) / w
    x[m - 1] = dp[m - 1]
    for i in range(m - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return out


cdef void _apply(double[:, ::1] u, double[:, ::1] ax, double[:, ::1] ay,
                 double ihx2, double ihy2, double[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t nx = u.shape[0], ny = u.shape[1], i, j
    cdef double c
    for i in range(1, nx - 1):
        for j in range(1, ny - 1):
            c = u[i, j]
            out[i, j] = (ax[i - 1, j] * (c - u[i - 1, j]) + ax[i, j] * (c - u[i + 1, j])) * ihx2 \
                + (ay[i, j - 1] * (c - u[i, j - 1]) + ay[i, j] * (c - u[i, j + 1])) * ihy2


def apply_5pt(double[:, ::1] u, double[:, ::1] ax, double[:, ::1] ay, double hx, double hy):
    out = np.zeros((u.shape[0], u.shape[1]))
    cdef double[:, ::1] o = out
    _apply(u, ax, ay, 1.0 / (hx * hx), 1.0 / (hy * hy), o)
    return out


def pcg_5pt(double[:, ::1] ax, double[:, ::1] ay, double hx, double hy,
            double[:, ::1] b, double[:, ::1] x, double tol, int maxiter):
    """Solve A x = b on interior nodes in place; boundary of ``x`` is held fixed.

    Stops when the sup-norm of the true residual is <= tol, or when a
    restart fails to halve it (round-off floor reached). Returns (iterations, final residual sup-norm).
    """
    cdef Py_ssize_t nx = x.shape[0], ny = x.shape[1], i, j
    cdef double ihx2 = 1.0 / (hx * hx), ihy2 = 1.0 / (hy * hy)
    cdef double[:, ::1] r = np.zeros((nx, ny))
    cdef double[:, ::1] z = np.zeros((nx, ny))
    cdef double[:, ::1] p = np.zeros((nx, ny))
    cdef double[:, ::1] q = np.zeros((nx, ny))
    cdef double[:, ::1] dinv = np.zeros((nx, ny))
    cdef double rz, rz_new, alpha, beta, pq, rmax, prev = INFINITY
    cdef int it = 0
    cdef bint fresh

    for i in range(1, nx - 1):
        for j in range(1, ny - 1):
            dinv[i, j] = 1.0 / ((ax[i - 1, j] + ax[i, j]) * ihx2 + (ay[i, j - 1] + ay[i, j]) * ihy2)

    while True:
        # (re)start from the true residual
        _apply(x, ax, ay, ihx2, ihy2, q)
        rmax = 0.0
        rz = 0.0
        for i in range(1, nx - 1):
            for j in range(1, ny - 1):
                r[i, j] = b[i, j] - q[i, j]
                if fabs(r[i, j]) > rmax:
                    rmax = fabs(r[i, j])
                z[i, j] = dinv[i, j] * r[i, j]
                p[i, j] = z[i, j]
                rz += r[i, j] * z[i, j]
        if rmax <= tol or it >= maxiter or rmax > 0.5 * prev:
            return it, rmax
        prev = rmax
        fresh = True
        while it < maxiter:
            _apply(p, ax, ay, ihx2, ihy2, q)
            pq = 0.0
            for i in range(1, nx - 1):
                for j in range(1, ny - 1):
                    pq += p[i, j] * q[i, j]
            if pq <= 0.0:
                break
            alpha = rz / pq
            rmax = 0.0
            rz_new = 0.0
            for i in range(1, nx - 1):
                for j in range(1, ny - 1):
                    x[i, j] += alpha * p[i, j]
                    r[i, j] -= alpha * q[i, j]
                    if fabs(r[i, j]) > rmax:
                        rmax = fabs(r[i, j])
                    z[i, j] = dinv[i, j] * r[i, j]
                    rz_new += r[i, j] * z[i, j]
            it += 1
            fresh = False
            if rmax <= tol:
                break
            beta = rz_new / rz
            rz = rz_new
            for i in range(1, nx - 1):
                for j in range(1, ny - 1):
                    p[i, j] = z[i, j] + beta * p[i, j]
        if fresh:
            return it, rmax
