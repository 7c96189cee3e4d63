"""Shooting oracle for the periodic problem  -u'' = f(t, u, u'),  u(0)=u(1), u'(0)=u'(1).

With ``a == 1`` on [0, 1] the no-flux condition is the periodic one: the
outward flux is ``-u'(0) + u'(1)`` (normals -1 at 0, +1 at 1), so zero flux
with a constant trace is exactly ``u(0) = u(1)``, ``u'(0) = u'(1)``. This
module finds such solutions with no finite differences in space at all:
fixed-step RK4 on ``u' = v, v' = -f(t, u, v)`` plus a 2D secant search on
the period map defect.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .expr import as_expression, evaluate


class IVPBlowUp(ArithmeticError):
    def __init__(self, step: int, t: float):
        super().__init__(f"non-finite state at step {step} (t={t:.6g})")
        self.step = step
        self.t = t


def _rhs(f, t, u, v):
    val = evaluate(f, {"t": t, "x": t, "y": 0.0, "s": u, "p1": v, "p2": 0.0})
    return v, -np.asarray(val, dtype=float)


def _rk4(f, u0, s0, steps: int, t_span=(0.0, 1.0), record: bool = False):
    t0, t1 = map(float, t_span)
    h = (t1 - t0) / steps
    u = np.asarray(u0, dtype=float) * 1.0
    v = np.asarray(s0, dtype=float) * 1.0
    ts = [t0]
    us = [u]
    vs = [v]
    for k in range(steps):
        t = t0 + k * h
        k1u, k1v = _rhs(f, t, u, v)
        k2u, k2v = _rhs(f, t + h / 2, u + h / 2 * k1u, v + h / 2 * k1v)
        k3u, k3v = _rhs(f, t + h / 2, u + h / 2 * k2u, v + h / 2 * k2v)
        k4u, k4v = _rhs(f, t + h, u + h * k3u, v + h * k3v)
        u = u + h / 6 * (k1u + 2 * k2u + 2 * k3u + k4u)
        v = v + h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
        if record:
            ts.append(t0 + (k + 1) * h)
            us.append(u)
            vs.append(v)
    return u, v, (np.array(ts), np.array(us), np.array(vs))


def integrate_ivp(f, u0: float, s0: float, steps: int, t_span=(0.0, 1.0)) -> tuple:
    """Classical RK4 with fixed step; returns ``(u(t1), u'(t1), (t, u, u'))``."""
    if steps < 16:
        raise ValueError("need at least 16 steps")
    f = as_expression(f)
    u, v, (ts, us, vs) = _rk4(f, float(u0), float(s0), steps, t_span, record=True)
    bad = ~(np.isfinite(us) & np.isfinite(vs))
    if bad.any():
        k = int(np.argmax(bad))
        raise IVPBlowUp(k, float(ts[k]))
    return float(u), float(v), (ts, us, vs)


@dataclass(frozen=True, eq=False)
class PeriodicSolution:
    c: float  # u(0)
    s: float  # u'(0)
    defect: tuple  # (u(1) - u(0), u'(1) - u'(0))
    valid: bool
    trajectory: tuple = field(repr=False)  # (t, u, u') arrays

    def sample(self, x) -> np.ndarray:
        """Linear interpolation of u at points ``x`` (exact at the RK4 nodes)."""
        t, u, _ = self.trajectory
        return np.interp(x, t, u)


def _defect(f, c, s, steps):
    u1, v1, _ = _rk4(f, c, s, steps)
    return np.stack([u1 - c, v1 - s])


def periodic_shoot(f, c_box=(-1.0, 1.0), s_box=(-1.0, 1.0), grid: int = 21, refine: int = 50,
                   steps: int = 1024, shoot_tol: float = 1e-10, dedup: float = 1e-6) -> list:
    """All distinct periodic solutions found from a lattice scan of (u(0), u'(0)).

    Every lattice cell in which both defect components change sign (or touch
    zero) seeds a damped Broyden (2D secant) iteration whose first Jacobian
    comes from the cell corners. Only fixed points with both defect
    components <= ``shoot_tol`` are returned.
    """
    f = as_expression(f)
    cs = np.linspace(*map(float, c_box), grid)
    ss = np.linspace(*map(float, s_box), grid)
    C, S = np.meshgrid(cs, ss, indexing="ij")
    D = _defect(f, C, S, steps)  # shape (2, grid, grid)

    seeds = []
    for i in range(grid - 1):
        for j in range(grid - 1):
            corner = D[:, i:i + 2, j:j + 2].reshape(2, 4)
            if not np.all(np.isfinite(corner)):
                continue
            if np.all(corner.min(axis=1) <= 0) and np.all(corner.max(axis=1) >= 0):
                dc = cs[i + 1] - cs[i]
                ds = ss[j + 1] - ss[j]
                J = np.column_stack([
                    (D[:, i + 1, j] + D[:, i + 1, j + 1] - D[:, i, j] - D[:, i, j + 1]) / (2 * dc),
                    (D[:, i, j + 1] + D[:, i + 1, j + 1] - D[:, i, j] - D[:, i + 1, j]) / (2 * ds),
                ])
                seeds.append((np.array([0.5 * (cs[i] + cs[i + 1]), 0.5 * (ss[j] + ss[j + 1])]), J))

    found = []
    for x, J in seeds:
        x, d = _broyden(f, x, J, steps, refine, shoot_tol)
        if d is None or np.max(np.abs(d)) > shoot_tol:
            continue
        if any(np.max(np.abs(x - np.array([p.c, p.s]))) < dedup for p in found):
            continue
        u1, v1, traj = _rk4(f, x[0], x[1], steps, record=True)
        defect = (float(u1 - x[0]), float(v1 - x[1]))
        found.append(PeriodicSolution(float(x[0]), float(x[1]), defect,
                                      max(abs(defect[0]), abs(defect[1])) <= shoot_tol, traj))
    found.sort(key=lambda p: (p.c, p.s))
    return found


def _broyden(f, x, J, steps, maxit, tol):
    d = _defect(f, x[0], x[1], steps)
    if not np.all(np.isfinite(d)):
        return x, None
    for _ in range(maxit):
        if np.max(np.abs(d)) <= tol:
            break
        dx = -np.linalg.lstsq(J, d, rcond=1e-12)[0]
        lam = 1.0
        for _ in range(12):
            xn = x + lam * dx
            dn = _defect(f, xn[0], xn[1], steps)
            if np.all(np.isfinite(dn)) and np.max(np.abs(dn)) < np.max(np.abs(d)):
                break
            lam *= 0.5
        else:
            return x, d
        step = xn - x
        J = J + np.outer(dn - d - J @ step, step) / (step @ step)
        x, d = xn, dn
    return x, d


def verify_1d_subsuper(candidate, f, side: str = "sub", samples: int = 201,
                       tol: float = 1e-6, delta: float = 1e-4) -> bool:
    """Pointwise check of the periodic sub/supersolution conditions on [0, 1].

    sub:   -w'' <= f(t, w, w'),  w(0) = w(1),  w'(0) >= w'(1)
    super: -w'' >= f(t, w, w'),  w(0) = w(1),  w'(0) <= w'(1)

    Derivatives are central differences with step ``delta``.
    """
    if side not in ("sub", "super"):
        raise ValueError(f"side must be 'sub' or 'super', got {side!r}")
    w = as_expression(candidate)
    f = as_expression(f)

    def W(t):
        return np.broadcast_to(np.asarray(evaluate(w, {"t": t, "x": t, "y": 0.0}), dtype=float),
                               np.shape(t))

    t = np.linspace(0.0, 1.0, samples)
    w0 = W(t)
    d1 = (W(t + delta) - W(t - delta)) / (2 * delta)
    d2 = (W(t + delta) - 2 * w0 + W(t - delta)) / delta ** 2
    fv = np.broadcast_to(np.asarray(evaluate(f, {"t": t, "x": t, "y": 0.0, "s": w0,
                                                 "p1": d1, "p2": 0.0}), dtype=float), t.shape)
    sign = 1.0 if side == "sub" else -1.0
    pde_ok = bool(np.all(sign * (-d2 - fv) <= tol))
    periodic_ok = abs(w0[-1] - w0[0]) <= tol
    slope_ok = sign * (d1[-1] - d1[0]) <= tol
    return bool(pde_ok and periodic_ok and slope_ok)
