"""No-flux and functional-constrained problems by bisection over the boundary constant.

For ``t`` in [0, 1] the boundary constant is ``c_t = t*beta + (1-t)*alpha``,
``alpha``/``beta`` being the constant traces of the bracket. Each ``c_t``
gets a Dirichlet solve, and a functional of that solution is driven to zero.

Sign table (what bisection sees is ``g = orientation * Phi``, always with
``g(0) <= 0 <= g(1)``):

=================  ============================  ===========  ============
functional         Phi(u)                        at t = 0     orientation
=================  ============================  ===========  ============
NoFlux             boundary flux of u            <= 0         +1
MeanTarget(gamma)  gamma - integral of u         >= 0         -1
Custom             user callable                 user's sign  +1, or -1 if
                                                              ``antitone_oriented``
=================  ============================  ===========  ============
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .dirichlet import PreconditionError, SolveReport, certify, solve_dirichlet, verify_sub_super
from .discretize import boundary_flux_conservative, flux_interior, interior_integral
from .model import ProblemSpec, ScalarField, SolverOptions


class NoFluxError(RuntimeError):
    pass


class EndpointSignError(NoFluxError):
    """The functional does not change sign between the bracket traces."""

    def __init__(self, phi0: float, phi1: float, message: str = ""):
        super().__init__(message or f"endpoint sign condition violated: phi(t=0)={phi0!r}, phi(t=1)={phi1!r}")
        self.phi0 = phi0
        self.phi1 = phi1


class BisectionError(NoFluxError):
    """The t-interval collapsed without |phi| reaching tolerance (a jump across zero)."""

    def __init__(self, message: str, profile: "FluxProfile", one_sided: dict):
        super().__init__(message)
        self.profile = profile
        self.one_sided = one_sided


class PhiEvaluationError(NoFluxError):
    def __init__(self, c: float, report: SolveReport):
        super().__init__(f"Dirichlet solve at c={c!r} did not converge "
                         f"({report.iterations} iterations, last step {report.final_step:.3e})")
        self.c = c
        self.report = report


# --- functionals ---------------------------------------------------------

class MonotoneFunctional:
    """Phi(u) for a converged constant-trace solution; antitone in u at fixed trace."""

    orientation = 1.0
    name = "functional"

    def value(self, problem: ProblemSpec, report: SolveReport) -> tuple:
        """Return ``(phi, extra)``; ``extra`` is a dict of diagnostics."""
        raise NotImplementedError


@dataclass(frozen=True)
class NoFlux(MonotoneFunctional):
    """Total outward weighted flux, computed from the load and cross-checked on the boundary."""

    name = "noflux"
    orientation = 1.0

    def value(self, problem, report):
        u = report.solution
        phi = flux_interior(problem, u)
        a_vals = ScalarField(u.grid, problem.eval_a(u.values))
        direct = boundary_flux_conservative(u, a_vals, tol=1e-12 * (1 + abs(report.c)))
        return phi, {"boundary_flux": direct, "flux_discrepancy": abs(phi - direct)}


@dataclass(frozen=True)
class MeanTarget(MonotoneFunctional):
    gamma: float = 0.0
    name = "mean_target"
    orientation = -1.0

    def value(self, problem, report):
        return self.gamma - interior_integral(report.solution), {}


@dataclass(frozen=True)
class Custom(MonotoneFunctional):
    """Wrap ``evaluator(problem, solution_field) -> float``.

    Set ``antitone_oriented`` when the callable follows the convention where
    the lower bracket member has Phi >= 0 (as MeanTarget does); its sign is
    then flipped for bisection.
    """

    evaluator: Callable = None
    antitone_oriented: bool = False
    name = "custom"

    @property
    def orientation(self):
        return -1.0 if self.antitone_oriented else 1.0

    def value(self, problem, report):
        return float(self.evaluator(problem, report.solution)), {}


# --- results -------------------------------------------------------------

@dataclass(frozen=True)
class FluxSample:
    t: float
    c: float
    phi: float
    converged: bool


@dataclass(frozen=True)
class FluxProfile:
    samples: tuple

    def __post_init__(self):
        ts = [s.t for s in self.samples]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("flux profile t values must be strictly increasing")

    @property
    def t(self):
        return np.array([s.t for s in self.samples])

    @property
    def c(self):
        return np.array([s.c for s in self.samples])

    @property
    def phi(self):
        return np.array([s.phi for s in self.samples])


@dataclass(frozen=True, eq=False)
class NoFluxResult:
    solution: ScalarField
    c_star: float
    t_star: float
    phi_residual: float
    bisection_steps: int
    dirichlet_report: SolveReport
    phi0: float
    phi1: float
    trace: tuple = field(default=(), repr=False)  # (t, c, phi) per evaluation, in order
    bracket_checks: tuple = field(default=(), repr=False)


# --- operations ----------------------------------------------------------

def homotopy_value(t: float, alpha: float, beta: float) -> float:
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t!r}")
    return t * beta + (1.0 - t) * alpha


def default_phi_tol(problem: ProblemSpec) -> float:
    if problem.options.phi_tol is not None:
        return problem.options.phi_tol
    return 1e-8 * (1.0 + problem.grid.measure * problem.a2_const)


def evaluate_phi(problem: ProblemSpec, functional: MonotoneFunctional, c: float,
                 options: SolverOptions | None = None) -> tuple:
    """Dirichlet solve at ``c`` followed by the functional.

    Returns ``(phi, report)``; ``phi`` is NaN when the solve did not converge.
    For NoFlux the report carries ``flux_discrepancy`` between the load-based
    and the boundary-based flux.
    """
    opts = options or problem.options
    traces = problem.traces
    if traces is not None and not traces[0] <= c <= traces[1]:
        raise PreconditionError(f"c={c!r} outside bracket traces {traces}")
    report = solve_dirichlet(problem, c, opts)
    if not report.converged:
        return float("nan"), report
    phi, extra = functional.value(problem, report)
    if "flux_discrepancy" in extra:
        report = replace(report, flux_discrepancy=extra["flux_discrepancy"])
    return float(phi), report


def _traces(problem: ProblemSpec) -> tuple:
    tr = problem.traces
    if tr is None:
        raise PreconditionError("bracket members must have constant boundary traces")
    alpha, beta = tr
    if alpha > beta:
        raise PreconditionError(f"trace of lower ({alpha}) exceeds trace of upper ({beta})")
    return alpha, beta


def solve_generalized(problem: ProblemSpec, functional: MonotoneFunctional,
                      options: SolverOptions | None = None, phi_tol: float | None = None,
                      t_tol: float | None = None) -> NoFluxResult:
    """Find ``t`` with ``Phi(u_t) = 0`` by bisection along ``c_t``."""
    opts = options or problem.options
    phi_tol = default_phi_tol(problem) if phi_tol is None else phi_tol
    t_tol = opts.t_tol if t_tol is None else t_tol
    alpha, beta = _traces(problem)
    sgn = functional.orientation
    checks = (verify_sub_super(problem.bracket_fields[0], problem, "noflux", "sub"),
              verify_sub_super(problem.bracket_fields[1], problem, "noflux", "super"))
    trace = []

    def g(t):
        c = homotopy_value(t, alpha, beta)
        phi, rep = evaluate_phi(problem, functional, c, opts)
        if not np.isfinite(phi):
            raise PhiEvaluationError(c, rep)
        trace.append((t, c, phi))
        return phi, rep

    def done(t, phi, rep, steps, phi0, phi1):
        return NoFluxResult(rep.solution, rep.c, t, phi, steps, certify(rep, problem),
                            phi0, phi1, tuple(trace), checks)

    phi0, rep0 = g(0.0)
    if alpha == beta:
        if abs(phi0) <= phi_tol:
            return done(0.0, phi0, rep0, 0, phi0, phi0)
        raise EndpointSignError(phi0, phi0, f"degenerate homotopy (alpha == beta == {alpha!r}) "
                                            f"with phi={phi0!r} != 0")
    phi1, rep1 = g(1.0)
    if not (sgn * phi0 <= phi_tol and sgn * phi1 >= -phi_tol):
        raise EndpointSignError(phi0, phi1)
    if abs(phi0) <= phi_tol:
        return done(0.0, phi0, rep0, 0, phi0, phi1)
    if abs(phi1) <= phi_tol:
        return done(1.0, phi1, rep1, 0, phi0, phi1)

    lo, hi = 0.0, 1.0
    steps = 0
    while hi - lo >= t_tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        phi, rep = g(mid)
        steps += 1
        if abs(phi) <= phi_tol:
            return done(mid, phi, rep, steps, phi0, phi1)
        if sgn * phi < 0:
            lo = mid
        else:
            hi = mid

    # jump across zero: report both one-sided solutions at the last bracket point
    c_mid = homotopy_value(0.5 * (lo + hi), alpha, beta)
    one_sided = {}
    for mode in ("lower", "upper"):
        phi_m, rep_m = evaluate_phi(problem, functional, c_mid, replace(opts, start=mode))
        one_sided[mode] = (phi_m, rep_m)
    near = sorted({(t, c, p) for t, c, p in trace if abs(t - lo) < 1e-3 or abs(t - hi) < 1e-3})
    profile = FluxProfile(tuple(FluxSample(t, c, p, True) for t, c, p in near))
    raise BisectionError(
        f"bisection interval [{lo!r}, {hi!r}] exhausted without |phi| <= {phi_tol!r}; "
        f"one-sided phi at c={c_mid!r}: lower-start {one_sided['lower'][0]!r}, "
        f"upper-start {one_sided['upper'][0]!r}", profile, one_sided)


def solve_noflux(problem: ProblemSpec, options: SolverOptions | None = None,
                 phi_tol: float | None = None, t_tol: float | None = None) -> NoFluxResult:
    """No-flux problem: constant trace chosen so the total boundary flux vanishes."""
    return solve_generalized(problem, NoFlux(), options, phi_tol, t_tol)


def sweep_flux(problem: ProblemSpec, functional: MonotoneFunctional | None = None, k: int = 11,
               options: SolverOptions | None = None, workers: int = 1) -> FluxProfile:
    """Evaluate the functional at ``k`` equispaced homotopy parameters."""
    if k < 2:
        raise ValueError("sweep needs k >= 2 points")
    functional = functional or NoFlux()
    alpha, beta = _traces(problem)
    ts = np.linspace(0.0, 1.0, k)

    def one(t):
        c = homotopy_value(float(t), alpha, beta)
        phi, rep = evaluate_phi(problem, functional, c, options)
        return FluxSample(float(t), c, phi, rep.converged)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            samples = list(pool.map(one, ts))
    else:
        samples = [one(t) for t in ts]
    return FluxProfile(tuple(samples))
