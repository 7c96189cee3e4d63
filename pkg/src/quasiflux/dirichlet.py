"""Constant-boundary Dirichlet solves by truncated, gradient-cutoff Picard iteration.

Each step freezes the coefficients at the truncated iterate ``w = T u``::

    -div[a(x, w) grad v] = f(x, w, h_n(grad w)),   v = c on the boundary,
    u <- (1 - theta) u + theta v.

The solution returned is the limit of this deterministic iteration from a
fixed start (the constant ``c`` clamped into the bracket by default), which
is how a single answer is selected when the problem has several.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from .discretize import (assemble_frozen, boundary_flux_conservative, gradient,
                         h1_seminorm, interior_integral, solve_linear)
from .expr import as_expression
from .model import (Bracket, Grid, ModelError, ProblemSpec, ScalarField,
                    SolverOptions, bracket_ordered)

BRACKET_CERT_TOL = 1e-8


class PreconditionError(ModelError):
    """Inputs violate a hypothesis the solver relies on."""


@dataclass(frozen=True, eq=False)
class SolveReport:
    solution: ScalarField
    c: float
    iterations: int
    final_step: float
    residual_inf: float  # linear residual of the last inner solve
    nonlinear_residual: float  # sup |A(u)u - f(u)| at interior nodes of the returned field
    bracket_violation: float
    cutoff_level: float
    cutoff_active: bool
    h1_seminorm: float  # of u - c
    converged: bool
    energy_lhs: float = float("nan")
    energy_rhs: float = float("nan")
    energy_t: float = float("nan")
    energy_passes: Optional[bool] = None
    flux_discrepancy: Optional[float] = None
    history: tuple = field(default=(), repr=False)

    @property
    def certified(self) -> bool:
        return self.converged and self.bracket_violation <= BRACKET_CERT_TOL


def truncate(u: ScalarField, bracket: Union[Bracket, tuple]) -> ScalarField:
    """Nodewise clamp into ``[lower, upper]``."""
    lo, up = bracket.fields(u.grid) if isinstance(bracket, Bracket) else bracket
    lo = lo.values if isinstance(lo, ScalarField) else lo
    up = up.values if isinstance(up, ScalarField) else up
    return ScalarField(u.grid, np.maximum(np.minimum(u.values, up), lo))


def gradient_cutoff(p, n: float):
    """Radial clamp: ``p`` if ``|p| <= n`` else ``n p / |p|``.

    ``p`` is a vector, or an array whose first axis holds the components.
    """
    if not n > 0:
        raise ValueError(f"cutoff level must be positive, got {n}")
    p = np.asarray(p, dtype=float)
    norm = np.sqrt(np.sum(p * p, axis=0))
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(norm > n, n / norm, 1.0)
    return p * scale


def pick_cutoff_level(bracket: Bracket, grid: Grid, safety: float) -> float:
    """Largest discrete gradient norm of the bracket members, plus ``safety``."""
    lo, up = bracket.fields(grid)
    return float(max(gradient(lo).norm().max(), gradient(up).norm().max()) + safety)


def _bracket_violation(u: np.ndarray, lo: np.ndarray, up: np.ndarray) -> float:
    return float(max(np.max(lo - u), np.max(u - up), 0.0))


def _check_preconditions(problem: ProblemSpec, c: float):
    if not bracket_ordered(problem.bracket, problem.grid):
        raise PreconditionError("bracket is not well ordered on the grid")
    wr = problem.weight_report
    if not wr.passes:
        raise PreconditionError(f"weight check failed: {wr.summary()}")
    if problem.traces is not None:
        alpha, beta = problem.traces
        if not alpha <= c <= beta:
            raise PreconditionError(
                f"boundary constant c={c!r} outside bracket traces [{alpha!r}, {beta!r}]")


def solve_dirichlet(problem: ProblemSpec, c: float, options: SolverOptions | None = None,
                    *, check: bool = True, keep_history: bool = False) -> SolveReport:
    """Picard iteration for ``-div[a(x,u) grad u] = f(x,u,grad u)``, ``u = c`` on the boundary.

    A non-converged run returns a report with ``converged=False``; only a
    failing linear solve raises.
    """
    opts = options or problem.options
    c = float(c)
    if check:
        _check_preconditions(problem, c)
    grid = problem.grid
    lo, up = (f.values for f in problem.bracket_fields)
    n_cut = pick_cutoff_level(problem.bracket, grid, opts.cutoff_safety)
    if not n_cut > 0:
        raise PreconditionError("cutoff level must be positive (raise cutoff_safety)")

    if opts.start == "lower":
        u = lo.copy()
    elif opts.start == "upper":
        u = up.copy()
    else:
        u = np.clip(np.full(grid.shape, c), lo, up)
    u[grid.boundary_mask] = c

    theta = opts.damping
    step = np.inf
    res = np.nan
    history = []
    lin = None
    it = 0
    active = False
    while it < opts.max_picard:
        w = np.maximum(np.minimum(u, up), lo)
        wf = ScalarField(grid, w)
        op = assemble_frozen(grid, problem.eval_a(w))
        gw = gradient(wf).as_array()
        norms = np.sqrt(np.sum(gw * gw, axis=0))
        active = bool(np.any(norms > n_cut))
        rhs = problem.eval_f(w, gradient_cutoff(gw, n_cut))
        if not np.all(np.isfinite(rhs)):
            break
        lin, res = solve_linear(op, ScalarField(grid, rhs), c, opts.lin_tol,
                                x0=lin, maxiter=opts.lin_maxiter)
        new = (1.0 - theta) * u + theta * lin.values
        step = float(np.max(np.abs(new - u)))
        u = new
        it += 1
        if keep_history:
            history.append(step)
        if step <= opts.picard_tol:
            break

    sol = ScalarField(grid, u)
    converged = bool(step <= opts.picard_tol)
    return SolveReport(
        solution=sol,
        c=c,
        iterations=it,
        final_step=step,
        residual_inf=float(res),
        nonlinear_residual=nonlinear_residual(problem, sol),
        bracket_violation=_bracket_violation(u, lo, up),
        cutoff_level=n_cut,
        cutoff_active=active,
        h1_seminorm=h1_seminorm(sol - c),
        converged=converged,
        history=tuple(history),
    )


def nonlinear_residual(problem: ProblemSpec, u: ScalarField) -> float:
    """sup |(-div[a(u) grad u] - f(u, grad u))| over interior nodes."""
    r = discrete_residual(problem, u)
    return float(np.max(np.abs(r[problem.grid.interior])))


def discrete_residual(problem: ProblemSpec, u: ScalarField) -> np.ndarray:
    op = assemble_frozen(problem.grid, problem.eval_a(u.values))
    f = problem.eval_f(u.values, gradient(u).as_array())
    r = op.apply(u) - f
    r[problem.grid.boundary_mask] = 0.0
    return r


@dataclass(frozen=True)
class EnergyCertificate:
    lhs: float
    rhs: float
    t: float
    M: float
    seminorm_sq: float
    passes: bool
    seminorm_bound_holds: bool


def energy_certificate(report: SolveReport, problem: ProblemSpec, c: float | None = None,
                       t: float | None = None) -> EnergyCertificate:
    """Check the weighted energy inequality for ``v = u - c``::

        int e^{t v^2} (2 t v^2 + 1 - b2 |v|) |grad v|^2  <=  M e^{t M^2} a2 |Omega|

    with ``M = max(|lower - c|_inf, |upper - c|_inf)`` and by default
    ``t = max(b2^2 / 4, 1)``; that choice keeps the weight >= 1/2, so
    ``|grad v|^2_L2 <= 2 rhs`` follows as well.
    """
    c = report.c if c is None else float(c)
    b2 = float(problem.bracket.b2)
    if t is None:
        t = problem.options.energy_t_override
    if t is None:
        t = max(b2 * b2 / 4.0, 1.0)
    lo, up = problem.bracket_fields
    M = max(float(np.max(np.abs(lo.values - c))), float(np.max(np.abs(up.values - c))))
    v = report.solution - c
    g2 = gradient(v).norm() ** 2
    vv = v.values
    weight = np.exp(t * vv * vv) * (2 * t * vv * vv + 1 - b2 * np.abs(vv))
    lhs = interior_integral(ScalarField(v.grid, weight * g2))
    rhs = M * np.exp(t * M * M) * problem.a2_const * problem.grid.measure
    semi = interior_integral(ScalarField(v.grid, g2))
    return EnergyCertificate(float(lhs), float(rhs), float(t), M, float(semi),
                             bool(lhs <= rhs * (1 + 1e-6)), bool(semi <= 2 * rhs * (1 + 1e-6)))


def certify(report: SolveReport, problem: ProblemSpec) -> SolveReport:
    """Attach the energy certificate to a report."""
    if not report.converged:
        return report
    cert = energy_certificate(report, problem)
    return replace(report, energy_lhs=cert.lhs, energy_rhs=cert.rhs, energy_t=cert.t,
                   energy_passes=cert.passes)


@dataclass(frozen=True)
class VerificationReport:
    passes: bool
    side: str
    flavor: str
    max_residual: float  # signed worst case: max r for sub, max -r for super
    trace_ok: bool
    trace_spread: float
    flux: Optional[float]
    message: str


def verify_sub_super(candidate, problem: ProblemSpec, flavor: str = "noflux", side: str = "sub",
                     c: float | None = None, tol: float | None = None) -> VerificationReport:
    """Classical (pointwise, discrete) sub/supersolution check.

    ``flavor`` is ``"dirichlet"`` (needs ``c``) or ``"noflux"``.
    """
    if side not in ("sub", "super"):
        raise ValueError(f"side must be 'sub' or 'super', got {side!r}")
    if flavor not in ("dirichlet", "noflux"):
        raise ValueError(f"flavor must be 'dirichlet' or 'noflux', got {flavor!r}")
    tol = problem.options.tol_verify if tol is None else tol
    grid = problem.grid
    u = candidate if isinstance(candidate, ScalarField) else grid.evaluate(as_expression(candidate))
    sign = 1.0 if side == "sub" else -1.0
    r = discrete_residual(problem, u)
    worst = float(np.max(sign * r[grid.interior]))
    pde_ok = worst <= tol
    spread = u.trace_spread()
    flux = None
    if flavor == "dirichlet":
        if c is None:
            raise ValueError("dirichlet flavor needs the boundary constant c")
        tr = u.boundary_values
        trace_ok = bool(np.all(sign * (tr - c) <= tol))
        msg = f"trace {'<=' if side == 'sub' else '>='} {c}: {'ok' if trace_ok else 'violated'}"
    else:
        if spread > tol:
            trace_ok = False
            msg = f"trace not constant (max spread {spread:.3e})"
        else:
            flux = boundary_flux_conservative(u, ScalarField(grid, problem.eval_a(u.values)), tol=tol)
            trace_ok = sign * flux <= tol
            msg = f"boundary flux {flux:.6g} {'<=' if side == 'sub' else '>='} 0: " \
                  f"{'ok' if trace_ok else 'violated'}"
    msg = f"pde residual worst {worst:.6g} ({'ok' if pde_ok else 'violated'}); {msg}"
    return VerificationReport(bool(pde_ok and trace_ok), side, flavor, worst, bool(trace_ok),
                              spread, flux, msg)
