"""Conservative finite differences on structured grids.

The frozen operator is the flux-form weighted Laplacian::

    (A u)_i = sum over neighbours nb of  a_face (u_i - u_nb) / h^2,
    a_face  = (a_i + a_nb) / 2,

applied at interior nodes only. Because each face coefficient is shared by
the two rows it touches, summing ``A u`` against the volume weights
telescopes to a pure boundary term; ``boundary_flux_conservative`` is that
term, which makes the discrete divergence identity exact.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .model import Grid, ModelError, ScalarField


class LinearSolveError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class VectorField:
    grid: Grid
    components: tuple  # one array per axis

    def norm(self) -> np.ndarray:
        return np.sqrt(sum(c * c for c in self.components))

    def as_array(self) -> np.ndarray:
        return np.stack(self.components)


def gradient(u: ScalarField) -> VectorField:
    """Central differences inside, second-order one-sided at the boundary."""
    g = u.grid
    comps = tuple(np.gradient(u.values, g.h[k], axis=k, edge_order=2) for k in range(g.dim))
    return VectorField(g, comps)


@dataclass(frozen=True, eq=False)
class FrozenOperator:
    grid: Grid
    # faces[k] has the grid shape shrunk by one along axis k
    faces: tuple

    def apply(self, u) -> np.ndarray:
        """``A u`` at interior nodes (zero on the boundary); ``u`` includes boundary values."""
        values = u.values if isinstance(u, ScalarField) else np.asarray(u, dtype=float)
        g = self.grid
        if g.dim == 1:
            (h,), (af,) = g.h, self.faces
            flux = af * np.diff(values) / h  # flux on face i+1/2, (u_{i+1}-u_i)/h
            out = np.zeros_like(values)
            out[1:-1] = -(flux[1:] - flux[:-1]) / h
            return out
        return _kernels.apply_5pt(np.ascontiguousarray(values), self.faces[0], self.faces[1], *g.h)

    def to_sparse(self):
        """Interior block as a scipy CSR matrix (diagnostics and tests)."""
        import scipy.sparse as sp

        g = self.grid
        inner_shape = tuple(m - 2 for m in g.shape)
        size = int(np.prod(inner_shape))
        cols = []
        for k in range(size):
            e = np.zeros(inner_shape)
            e.flat[k] = 1.0
            full = np.zeros(g.shape)
            full[g.interior] = e
            cols.append(self.apply(full)[g.interior].ravel())
        return sp.csr_matrix(np.array(cols).T)


def _face_means(a: np.ndarray, axis: int) -> np.ndarray:
    lo = [slice(None)] * a.ndim
    hi = [slice(None)] * a.ndim
    lo[axis] = slice(0, -1)
    hi[axis] = slice(1, None)
    return np.ascontiguousarray(0.5 * (a[tuple(lo)] + a[tuple(hi)]))


def assemble_frozen(grid: Grid, a_values: ScalarField) -> FrozenOperator:
    a = a_values.values if isinstance(a_values, ScalarField) else np.asarray(a_values, dtype=float)
    faces = tuple(_face_means(a, k) for k in range(grid.dim))
    for af in faces:
        if not np.all(af > 0):
            bad = float(np.min(af)) if np.all(np.isfinite(af)) else float("nan")
            raise ModelError(f"nonpositive or non-finite face coefficient (min {bad})")
    return FrozenOperator(grid, faces)


def solve_linear(op: FrozenOperator, rhs: ScalarField, boundary_value: float,
                 lin_tol: float = 1e-12, x0: ScalarField | None = None,
                 maxiter: int = 20000) -> tuple:
    """Solve ``A u = rhs`` inside with ``u = boundary_value`` on the boundary.

    Returns ``(field, residual_inf)``. 1D uses tridiagonal elimination, 2D
    Jacobi-preconditioned conjugate gradients (``x0`` warm start). The
    residual is checked against ``lin_tol * (1 + |rhs|_inf)``, or the
    float64 round-off floor when that is larger (fine grids, tight lin_tol).
    """
    g = op.grid
    b = rhs.values if isinstance(rhs, ScalarField) else np.asarray(rhs, dtype=float)
    c = float(boundary_value)
    tol = lin_tol * (1.0 + float(np.abs(b[g.interior]).max()))
    # unknown is v = u - c (zero trace); A annihilates constants, and v carries
    # the digits that u = c + v would round away
    if g.dim == 1:
        (h,), (af,) = g.h, op.faces
        diag = (af[:-1] + af[1:]) / h ** 2
        off = -af[1:-1] / h ** 2
        v = np.zeros(g.shape)
        v[1:-1] = _kernels.tridiag_solve(np.ascontiguousarray(off), np.ascontiguousarray(diag),
                                         np.ascontiguousarray(off), np.ascontiguousarray(b[1:-1], dtype=float))
    else:
        v = np.zeros(g.shape) if x0 is None else np.array(x0.values, dtype=float) - c
        v[g.boundary_mask] = 0.0
        _kernels.pcg_5pt(op.faces[0], op.faces[1], g.h[0], g.h[1],
                         np.ascontiguousarray(b, dtype=float), v, tol, maxiter)
    res = float(np.abs(op.apply(v)[g.interior] - b[g.interior]).max())
    u = v + c
    if not np.isfinite(res) or res > max(tol, roundoff_floor(op, v)):
        raise LinearSolveError("linear solve did not reach tolerance", res)
    return ScalarField(g, u), res


def roundoff_floor(op: FrozenOperator, v: np.ndarray) -> float:
    """Smallest residual float64 can certify for ``v``: ``32 eps |A|_inf |v|_inf``."""
    norm_a = 0.0
    for af, h in zip(op.faces, op.grid.h):
        norm_a += 4.0 * float(af.max()) / h ** 2
    return 32.0 * np.finfo(float).eps * norm_a * float(np.abs(v).max())


def interior_integral(g: ScalarField) -> float:
    """Trapezoid rule over the whole domain (boundary nodes half-weighted)."""
    return float(np.sum(g.values * g.grid.volume_weights))


def boundary_flux_conservative(u: ScalarField, a_values: ScalarField, tol: float = 0.0) -> float:
    """Outward weighted flux through the boundary, in the operator's own flux form.

    Requires a constant boundary trace (spread <= ``tol``).
    """
    g = u.grid
    spread = u.trace_spread()
    if spread > tol:
        raise ModelError(f"boundary trace is not constant (spread {spread:.3e})")
    a = a_values.values if isinstance(a_values, ScalarField) else np.asarray(a_values)
    total = 0.0
    for e in g.boundary_entries:
        nb = e.inward
        axis = next(k for k, nu in enumerate(e.normal) if nu)
        a_face = 0.5 * (a[e.index] + a[nb])
        total -= a_face * (u.values[nb] - u.values[e.index]) / g.h[axis] * e.weight
    return float(total)


def flux_interior(problem, u: ScalarField) -> float:
    """Boundary flux obtained from the load: ``-integral of f(x, u, grad u)``."""
    grad = gradient(u).as_array()
    return -interior_integral(ScalarField(u.grid, problem.eval_f(u.values, grad)))


def h1_seminorm(u: ScalarField) -> float:
    gr = gradient(u)
    return float(np.sqrt(interior_integral(ScalarField(u.grid, gr.norm() ** 2))))
