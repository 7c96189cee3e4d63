"""Domains, grids, fields, brackets and problem declarations.

Also houses the sampled checks of the structural hypotheses on the weight
(``a >= 1`` and affine growth in ``|s|``) and of the Bernstein-Nagumo bound
on the right-hand side. These checks are empirical: they certify the
hypotheses on a finite sample cloud only.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Union

import numpy as np

from .expr import Expression, as_expression, evaluate, evaluate_on


class ModelError(ValueError):
    pass


class ValidationError(ModelError):
    """A sampled hypothesis check hit a NaN or other unusable sample."""


# --- domains and grids ---------------------------------------------------

@dataclass(frozen=True)
class Interval1D:
    x0: float
    x1: float

    def __post_init__(self):
        if not self.x0 < self.x1:
            raise ModelError(f"degenerate interval [{self.x0}, {self.x1}]")

    @property
    def bounds(self):
        return ((self.x0, self.x1),)


@dataclass(frozen=True)
class Rectangle2D:
    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ModelError(f"degenerate rectangle [{self.x0}, {self.x1}]x[{self.y0}, {self.y1}]")

    @property
    def bounds(self):
        return ((self.x0, self.x1), (self.y0, self.y1))


Domain = Union[Interval1D, Rectangle2D]


@dataclass(frozen=True)
class BoundaryEntry:
    """One boundary node seen from one side of the domain.

    Rectangle corners appear twice, once per adjacent edge, each with half
    the edge spacing as surface weight.
    """

    index: tuple
    normal: tuple
    weight: float

    @property
    def inward(self) -> tuple:
        return tuple(i - int(nu) for i, nu in zip(self.index, self.normal))


@dataclass(frozen=True, eq=False)
class Grid:
    domain: Domain
    n: tuple  # nodes per axis, boundary included

    @property
    def dim(self) -> int:
        return len(self.n)

    @property
    def shape(self) -> tuple:
        return tuple(self.n)

    @cached_property
    def h(self) -> tuple:
        return tuple((b - a) / (m - 1) for (a, b), m in zip(self.domain.bounds, self.n))

    @cached_property
    def axes(self) -> tuple:
        return tuple(np.linspace(a, b, m) for (a, b), m in zip(self.domain.bounds, self.n))

    @cached_property
    def coords(self) -> tuple:
        """Per-axis coordinate arrays broadcast to the full grid shape."""
        return tuple(np.meshgrid(*self.axes, indexing="ij"))

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for ax in range(self.dim):
            idx = [slice(None)] * self.dim
            idx[ax] = 0
            mask[tuple(idx)] = True
            idx[ax] = -1
            mask[tuple(idx)] = True
        return mask

    @property
    def interior(self) -> tuple:
        return tuple(slice(1, -1) for _ in range(self.dim))

    @cached_property
    def volume_weights(self) -> np.ndarray:
        """Tensor-product trapezoid weights."""
        w = np.ones(())
        for m, h in zip(self.n, self.h):
            wa = np.full(m, h)
            wa[0] = wa[-1] = h / 2
            w = np.multiply.outer(w, wa)
        return w

    @cached_property
    def boundary_entries(self) -> tuple:
        entries = []
        if self.dim == 1:
            m = self.n[0]
            entries.append(BoundaryEntry((0,), (-1,), 1.0))
            entries.append(BoundaryEntry((m - 1,), (1,), 1.0))
            return tuple(entries)
        nx, ny = self.n
        hx, hy = self.h
        # edges x = x0, x = x1 run along y; edges y = y0, y = y1 run along x
        for i, nu in ((0, -1), (nx - 1, 1)):
            for j in range(ny):
                w = hy / 2 if j in (0, ny - 1) else hy
                entries.append(BoundaryEntry((i, j), (nu, 0), w))
        for j, nu in ((0, -1), (ny - 1, 1)):
            for i in range(nx):
                w = hx / 2 if i in (0, nx - 1) else hx
                entries.append(BoundaryEntry((i, j), (0, nu), w))
        return tuple(entries)

    @cached_property
    def surface_weights(self) -> np.ndarray:
        w = np.zeros(self.shape)
        for e in self.boundary_entries:
            w[e.index] += e.weight
        return w

    @property
    def measure(self) -> float:
        return float(np.prod([b - a for a, b in self.domain.bounds]))

    def bindings(self) -> dict:
        """Spatial variable bindings (``x``, ``y``) for expression evaluation."""
        names = ("x", "y")
        out = {names[k]: self.coords[k] for k in range(self.dim)}
        if self.dim == 1:
            out["y"] = np.zeros(self.shape)
        return out

    def field(self, values) -> "ScalarField":
        return ScalarField(self, np.broadcast_to(np.asarray(values, dtype=float), self.shape).copy())

    def evaluate(self, e, **extra) -> "ScalarField":
        """Evaluate an expression (or number) at every node."""
        b = self.bindings()
        b.update(extra)
        return ScalarField(self, evaluate_on(as_expression(e), self.shape, b))


def build_grid(domain: Domain, n) -> Grid:
    if isinstance(n, (int, np.integer)):
        n = (int(n),) * (1 if isinstance(domain, Interval1D) else 2)
    n = tuple(int(m) for m in n)
    expected = 1 if isinstance(domain, Interval1D) else 2
    if len(n) != expected:
        raise ModelError(f"need {expected} node count(s), got {len(n)}")
    if min(n) < 3:
        raise ModelError(f"need at least 3 nodes per axis, got {n}")
    return Grid(domain, n)


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise ModelError(f"field shape {self.values.shape} != grid shape {self.grid.shape}")

    @property
    def valid(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    @property
    def boundary_values(self) -> np.ndarray:
        return self.values[self.grid.boundary_mask]

    def trace_spread(self) -> float:
        b = self.boundary_values
        return float(b.max() - b.min())

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def __repr__(self):
        return f"ScalarField(n={self.grid.n}, range=[{self.values.min():.6g}, {self.values.max():.6g}])"

    def __sub__(self, other):
        other = other.values if isinstance(other, ScalarField) else other
        return ScalarField(self.grid, self.values - other)

    def __add__(self, other):
        other = other.values if isinstance(other, ScalarField) else other
        return ScalarField(self.grid, self.values + other)


# --- brackets and problems -----------------------------------------------

@dataclass(frozen=True)
class Bracket:
    """Ordered pair (lower, upper) with Bernstein-Nagumo constants.

    ``lower``/``upper`` may be expressions (strings or numbers are parsed)
    or ScalarFields already living on a grid.
    """

    lower: object
    upper: object
    a2: object = 0.0
    b2: float = 0.0

    def __post_init__(self):
        for name in ("lower", "upper"):
            v = getattr(self, name)
            if not isinstance(v, ScalarField):
                object.__setattr__(self, name, as_expression(v))
        object.__setattr__(self, "a2", as_expression(self.a2))
        if not self.a2.variables and not self.a2() >= 0:
            raise ModelError(f"a2 must be >= 0, got {self.a2()}")
        if not self.b2 >= 0:
            raise ModelError(f"b2 must be >= 0, got {self.b2}")

    def fields(self, grid: Grid) -> tuple:
        return _on_grid(self.lower, grid), _on_grid(self.upper, grid)

    def a2_values(self, grid: Grid) -> np.ndarray:
        return grid.evaluate(self.a2).values

    def a2_const(self, grid: Grid) -> float:
        return float(np.max(self.a2_values(grid)))


def _on_grid(v, grid: Grid) -> ScalarField:
    if isinstance(v, ScalarField):
        if v.grid.shape != grid.shape:
            raise ModelError("bracket field lives on a different grid")
        return v
    return grid.evaluate(v)


@dataclass(frozen=True)
class SolverOptions:
    picard_tol: float = 1e-10
    max_picard: int = 500
    damping: float = 0.7
    lin_tol: float = 1e-12
    lin_maxiter: int = 20000
    cutoff_safety: float = 10.0
    energy_t_override: Optional[float] = None
    # where the Picard loop starts: 'clamp' (constant c clamped), 'lower', 'upper'
    start: str = "clamp"
    phi_tol: Optional[float] = None
    t_tol: float = 1e-12
    tol_verify: float = 1e-8

    def __post_init__(self):
        if not self.picard_tol > 0:
            raise ModelError("picard_tol must be > 0")
        if not 0 < self.damping <= 1:
            raise ModelError("damping must lie in (0, 1]")
        if self.cutoff_safety < 0:
            raise ModelError("cutoff_safety must be >= 0")
        if self.start not in ("clamp", "lower", "upper"):
            raise ModelError(f"unknown start mode {self.start!r}")


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """-div[a(x,u) grad u] = f(x, u, grad u) on a structured grid."""

    grid: Grid
    a: Expression
    f: Expression
    bracket: Bracket
    options: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        object.__setattr__(self, "a", as_expression(self.a))
        object.__setattr__(self, "f", as_expression(self.f))

    @property
    def domain(self) -> Domain:
        return self.grid.domain

    @cached_property
    def bracket_fields(self) -> tuple:
        return self.bracket.fields(self.grid)

    @cached_property
    def traces(self) -> tuple:
        """(alpha, beta) when both bracket members have constant traces, else None."""
        lo, up = self.bracket_fields
        if lo.trace_spread() > 0 or up.trace_spread() > 0:
            return None
        return float(lo.boundary_values[0]), float(up.boundary_values[0])

    @cached_property
    def a2_const(self) -> float:
        return self.bracket.a2_const(self.grid)

    @cached_property
    def weight_report(self) -> "WeightReport":
        lo, up = self.bracket_fields
        return validate_weight(self.a, self.grid, (float(lo.values.min()), float(up.values.max())))

    def eval_a(self, s: np.ndarray) -> np.ndarray:
        b = self.grid.bindings()
        b["s"] = s
        return evaluate_on(self.a, self.grid.shape, b)

    def eval_f(self, s: np.ndarray, grad: np.ndarray) -> np.ndarray:
        b = self.grid.bindings()
        b["s"] = s
        b["p1"] = grad[0]
        b["p2"] = grad[1] if self.grid.dim > 1 else np.zeros(self.grid.shape)
        b["t"] = self.grid.coords[0]
        return evaluate_on(self.f, self.grid.shape, b)

    def with_grid(self, n) -> "ProblemSpec":
        return ProblemSpec(build_grid(self.domain, n), self.a, self.f, self.bracket, self.options)

    def with_options(self, **kw) -> "ProblemSpec":
        from dataclasses import replace
        return ProblemSpec(self.grid, self.a, self.f, self.bracket, replace(self.options, **kw))


# --- hypothesis checks ---------------------------------------------------

@dataclass(frozen=True)
class WeightReport:
    min_value: float
    argmin: tuple  # (node coordinates, s)
    passes: bool
    a1: float  # empirical slope of the affine-in-|s| envelope
    b1: float  # empirical intercept

    def summary(self) -> str:
        if np.isnan(self.min_value):
            return f"a(x,s) is not finite at x={self.argmin[0]}, s={self.argmin[1]:.6g}"
        status = "pass" if self.passes else "FAIL"
        return (f"a(x,s) >= 1: {status} (sampled min {self.min_value:.6g}); "
                f"envelope a <= {self.a1:.6g}|s| + {self.b1:.6g} (sampled)")


def validate_weight(a, grid: Grid, s_range, samples: int = 33) -> WeightReport:
    """Sampled check of ``a >= 1`` plus an affine-in-|s| envelope fit.

    Per node, least squares gives slope/intercept against |s|; the slope is
    clipped at 0 and the intercept raised until the line dominates every
    sample. The reported constants are the sup over nodes.
    """
    a = as_expression(a)
    s_min, s_max = map(float, s_range)
    if s_max < s_min:
        raise ModelError(f"empty s range [{s_min}, {s_max}]")
    s = np.linspace(s_min, s_max, max(int(samples), 1)) if s_max > s_min else np.array([s_min])
    b = {k: v[..., None] for k, v in grid.bindings().items()}
    b["s"] = s
    vals = np.broadcast_to(np.asarray(evaluate(a, b), dtype=float), grid.shape + s.shape)
    flat = vals.reshape(-1, s.size)
    bad = ~np.isfinite(flat)
    if bad.any():
        node, k = np.argwhere(bad)[0]
        x = tuple(float(c.ravel()[node]) for c in grid.coords)
        nan = float("nan")
        return WeightReport(nan, (x, float(s[k])), False, nan, nan)
    node, k = np.unravel_index(np.argmin(flat), flat.shape)
    x = tuple(float(c.ravel()[node]) for c in grid.coords)
    min_value = float(flat[node, k])

    r = np.abs(s)
    rc = r - r.mean()
    if rc @ rc > 0:
        slope = (flat - flat.mean(axis=1, keepdims=True)) @ rc / (rc @ rc)
        slope = np.maximum(slope, 0.0)
    else:
        slope = np.zeros(flat.shape[0])
    intercept = np.max(flat - slope[:, None] * r[None, :], axis=1)
    return WeightReport(min_value, (x, float(s[k])), min_value >= 1.0,
                        float(slope.max()), float(intercept.max()))


def _p_samples(dim: int, p_max: float, samples: int) -> np.ndarray:
    """Gradient samples in the ball |p| <= p_max, shape (dim, K)."""
    radii = np.linspace(0.0, p_max, samples + 1)[1:]
    if dim == 1:
        return np.concatenate([-radii[::-1], [0.0], radii])[None, :]  # exact 0 in the middle
    ang = np.linspace(0.0, 2 * np.pi, 4 * samples, endpoint=False)
    R, A = np.meshgrid(radii, ang, indexing="ij")
    pts = np.stack([(R * np.cos(A)).ravel(), (R * np.sin(A)).ravel()])
    return np.concatenate([np.zeros((2, 1)), pts], axis=1)


def _f_cloud(f: Expression, grid: Grid, bracket: Bracket, p: np.ndarray, samples: int):
    lo, up = bracket.fields(grid)
    frac = np.linspace(0.0, 1.0, samples)
    # shape: nodes x s-samples x p-samples
    s = lo.values.ravel()[:, None] + (up.values - lo.values).ravel()[:, None] * frac[None, :]
    b = {k: v.ravel()[:, None, None] for k, v in grid.bindings().items()}
    b["t"] = b["x"]
    b["s"] = s[:, :, None]
    b["p1"] = p[0][None, None, :]
    b["p2"] = (p[1] if p.shape[0] > 1 else np.zeros(p.shape[1]))[None, None, :]
    vals = np.broadcast_to(np.asarray(evaluate(f, b), dtype=float), s.shape + (p.shape[1],))
    bad = ~np.isfinite(vals)
    if bad.any():
        node, ks, kp = np.argwhere(bad)[0]
        x = tuple(float(c.ravel()[node]) for c in grid.coords)
        raise ValidationError(f"f evaluates to {vals[node, ks, kp]} at x={x}, "
                              f"s={s[node, ks]}, p={tuple(p[:, kp])}")
    return vals


def estimate_bn(f, grid: Grid, bracket: Bracket, p_max: float, samples: int = 21) -> tuple:
    """Empirical Bernstein-Nagumo constants ``(a2_const, b2)``.

    Two-pass fit over the cloud {node x, s in [lower(x), upper(x)], |p| <= p_max}:
    a2_const starts as sup |f| at p = 0, b2 is the largest
    ``(|f| - a2_const) / |p|^2`` over samples with ``|p| >= p_max/2``, and a
    final pass raises a2_const until ``|f| <= a2_const + b2 |p|^2`` holds at
    every sample.
    """
    if not p_max > 0:
        raise ModelError("p_max must be > 0")
    f = as_expression(f)
    p = _p_samples(grid.dim, float(p_max), samples)
    absf = np.abs(_f_cloud(f, grid, bracket, p, samples))
    pn2 = np.sum(p * p, axis=0)
    at_zero = pn2 == 0
    a2 = float(absf[:, :, at_zero].max())
    outer = pn2 >= (p_max / 2) ** 2
    b2 = max(0.0, float(((absf[:, :, outer] - a2) / pn2[outer]).max()))
    a2 = max(a2, float((absf - b2 * pn2).max()))
    return a2, b2


def check_bn(f, grid: Grid, bracket: Bracket, p_max: float, samples: int = 21) -> tuple:
    """Does the declared (a2(x), b2) dominate |f| on the sample cloud?

    Returns ``(passes, worst_excess)`` where excess is ``|f| - a2 - b2|p|^2``.
    """
    f = as_expression(f)
    p = _p_samples(grid.dim, float(p_max), samples)
    absf = np.abs(_f_cloud(f, grid, bracket, p, samples))
    bound = bracket.a2_values(grid).ravel()[:, None, None] + bracket.b2 * np.sum(p * p, axis=0)[None, None, :]
    excess = float((absf - bound).max())
    return excess <= 1e-12 * (1 + float(np.abs(bound).max())), excess


def bracket_ordered(bracket: Bracket, grid: Grid) -> bool:
    lo, up = bracket.fields(grid)
    return bool(np.all(lo.values <= up.values))
