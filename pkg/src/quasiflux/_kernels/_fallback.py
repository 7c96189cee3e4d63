"""Pure numpy versions of the compiled kernels (same signatures and semantics)."""
import numpy as np
from scipy.linalg import solve_banded


def tridiag_solve(sub, diag, sup, rhs):
    m = len(diag)
    ab = np.zeros((3, m))
    ab[0, 1:] = sup
    ab[1] = diag
    ab[2, :-1] = sub
    return solve_banded((1, 1), ab, np.asarray(rhs, dtype=float))


def apply_5pt(u, ax, ay, hx, hy):
    out = np.zeros_like(u)
    c = u[1:-1, 1:-1]
    out[1:-1, 1:-1] = (
        (ax[:-1, 1:-1] * (c - u[:-2, 1:-1]) + ax[1:, 1:-1] * (c - u[2:, 1:-1])) / (hx * hx)
        + (ay[1:-1, :-1] * (c - u[1:-1, :-2]) + ay[1:-1, 1:] * (c - u[1:-1, 2:])) / (hy * hy)
    )
    return out


def pcg_5pt(ax, ay, hx, hy, b, x, tol, maxiter):
    inner = (slice(1, -1), slice(1, -1))
    dinv = np.zeros_like(x)
    dinv[inner] = 1.0 / ((ax[:-1, 1:-1] + ax[1:, 1:-1]) / (hx * hx)
                         + (ay[1:-1, :-1] + ay[1:-1, 1:]) / (hy * hy))
    it = 0
    prev = np.inf
    while True:
        r = np.zeros_like(x)
        r[inner] = b[inner] - apply_5pt(x, ax, ay, hx, hy)[inner]
        rmax = float(np.abs(r).max())
        if rmax <= tol or it >= maxiter or rmax > 0.5 * prev:
            return it, rmax
        prev = rmax
        z = dinv * r
        p = z.copy()
        rz = float(np.vdot(r, z))
        fresh = True
        while it < maxiter:
            q = apply_5pt(p, ax, ay, hx, hy)
            pq = float(np.vdot(p, q))
            if pq <= 0.0:
                break
            alpha = rz / pq
            x[inner] += alpha * p[inner]
            r -= alpha * q
            it += 1
            fresh = False
            rmax = float(np.abs(r).max())
            if rmax <= tol:
                break
            z = dinv * r
            rz_new = float(np.vdot(r, z))
            p = z + (rz_new / rz) * p
            rz = rz_new
        if fresh:
            return it, rmax
