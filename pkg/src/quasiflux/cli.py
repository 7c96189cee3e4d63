"""Command line driver.

Exit codes: 0 success, 1 mathematical failure (non-convergence, failed
hypothesis, no solution found), 2 input error (bad file, bad flags).

Stdout carries ``key=value`` summary lines; numbers use 17 significant
digits so reruns are byte-identical. ``--out`` writes CSV: ``#``-prefixed
``key=value`` comment lines, a header row, then one row per node.
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dirichlet import PreconditionError, certify, energy_certificate, solve_dirichlet, verify_sub_super
from .expr import ExpressionError, as_expression
from .model import ModelError, ScalarField, bracket_ordered, check_bn, estimate_bn
from .noflux import (EndpointSignError, MeanTarget, NoFlux, NoFluxError, solve_generalized,
                     solve_noflux, sweep_flux)
from .oracle1d import periodic_shoot, verify_1d_subsuper
from .problemfile import ProblemFileError, load

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v) + 0.0  # no "-0"
        return format(v, ".17g") if math.isfinite(v) else "nan"
    return str(v)


class Emitter:
    def __init__(self, stream):
        self.stream = stream
        self.nonfinite = False

    def __call__(self, key, value):
        if isinstance(value, (float, np.floating)) and not math.isfinite(float(value)):
            self.nonfinite = True
            self.stream.write(f"{key}=nan\n")
            self.stream.write(f"{key}_failed=true\n")
            return
        self.stream.write(f"{key}={fmt(value)}\n")


def write_field_csv(path, u: ScalarField, meta: dict):
    g = u.grid
    names = ["x", "y"][: g.dim]
    lines = [f"# {k}={fmt(v)}" for k, v in meta.items()]
    lines.append(",".join(names + ["u"]))
    coords = [c.ravel() for c in g.coords]
    vals = u.values.ravel()
    for k in range(vals.size):
        lines.append(",".join(fmt(float(c[k])) for c in coords) + "," + fmt(float(vals[k])))
    Path(path).write_text("\n".join(lines) + "\n")


def _cell(text: str) -> float:
    text = text.strip()
    if text in ("true", "false"):
        return float(text == "true")
    return float(text)


def read_csv(path) -> tuple:
    """Return ``(header, rows)`` skipping ``#`` comment lines."""
    header = None
    rows = []
    for line in Path(path).read_text().splitlines():
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        if header is None:
            header = line.strip().split(",")
            continue
        rows.append([_cell(v) for v in line.split(",")])
    return header, np.array(rows)


def _report_lines(emit, rep):
    emit("converged", rep.converged)
    emit("certified", rep.certified)
    emit("iterations", rep.iterations)
    emit("final_step", rep.final_step)
    emit("residual_inf", rep.residual_inf)
    emit("nonlinear_residual", rep.nonlinear_residual)
    emit("bracket_violation", rep.bracket_violation)
    emit("cutoff_level", rep.cutoff_level)
    emit("cutoff_active", rep.cutoff_active)
    emit("h1_seminorm", rep.h1_seminorm)
    if rep.energy_passes is not None:
        emit("energy_lhs", rep.energy_lhs)
        emit("energy_rhs", rep.energy_rhs)
        emit("energy_t", rep.energy_t)
        emit("energy_passes", rep.energy_passes)


def _meta(rep) -> dict:
    return {k: getattr(rep, k) for k in ("c", "converged", "iterations", "final_step", "residual_inf",
                                         "bracket_violation", "cutoff_active", "h1_seminorm")}


def _head(emit, args, pf):
    emit("command", args.command)
    emit("problem", pf.digest)
    emit("grid", "x".join(str(m) for m in pf.problem.grid.n))


# --- commands ------------------------------------------------------------

def cmd_validate(args, out):
    pf = load(args.file)
    p = pf.problem
    emit = Emitter(out)
    _head(emit, args, pf)
    ok = True
    wr = p.weight_report
    emit("weight_lower_bound", "pass" if wr.passes else "fail")
    emit("weight_min", wr.min_value)
    if not wr.passes:
        out.write(f"# a(x,s) >= 1 fails: min {fmt(wr.min_value)} at x={wr.argmin[0]}, s={fmt(wr.argmin[1])}\n")
    growth = math.isfinite(wr.a1) and math.isfinite(wr.b1)
    emit("weight_growth", "pass" if growth else "fail")
    emit("weight_a1", wr.a1)
    emit("weight_b1", wr.b1)
    ordered = bracket_ordered(p.bracket, p.grid)
    emit("bracket_ordered", "pass" if ordered else "fail")
    a2_ok = bool(np.all(p.bracket.a2_values(p.grid) >= 0))
    emit("a2_nonnegative", "pass" if a2_ok else "fail")
    ok = wr.passes and growth and ordered and a2_ok
    if ordered:
        from .dirichlet import pick_cutoff_level
        p_max = pick_cutoff_level(p.bracket, p.grid, p.options.cutoff_safety)
        emit("bn_p_max", p_max)
        if p_max > 0:
            bn_ok, excess = check_bn(p.f, p.grid, p.bracket, p_max)
            a2e, b2e = estimate_bn(p.f, p.grid, p.bracket, p_max)
            emit("bernstein_nagumo", "pass" if bn_ok else "fail")
            emit("bn_worst_excess", excess)
            emit("bn_empirical_a2", a2e)
            emit("bn_empirical_b2", b2e)
            ok = ok and bn_ok
    out.write("# constants are sampled on the grid cloud, not proven\n")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_solve_dirichlet(args, out):
    pf = load(args.file)
    p = pf.problem
    if args.start:
        p = p.with_options(start=args.start)
    emit = Emitter(out)
    _head(emit, args, pf)
    emit("c", args.c)
    rep = certify(solve_dirichlet(p, args.c), p)
    _report_lines(emit, rep)
    if args.out:
        write_field_csv(args.out, rep.solution, _meta(rep))
    return EXIT_OK if rep.certified else EXIT_FAIL


def _emit_noflux(emit, res, label="t_star"):
    emit("c_star", res.c_star)
    emit(label, res.t_star)
    emit("phi_residual", res.phi_residual)
    emit("phi_t0", res.phi0)
    emit("phi_t1", res.phi1)
    emit("bisection_steps", res.bisection_steps)
    for chk in res.bracket_checks:
        emit(f"bracket_{chk.side}_verified", chk.passes)
    _report_lines(emit, res.dirichlet_report)
    for t, c, phi in res.trace:
        emit("trace", f"{fmt(t)},{fmt(c)},{fmt(phi)}")


def _noflux_common(args, out, functional, label):
    pf = load(args.file)
    p = pf.problem
    emit = Emitter(out)
    _head(emit, args, pf)
    emit("functional", functional.name)
    try:
        if isinstance(functional, NoFlux) and label == "t_star":
            res = solve_noflux(p)
        else:
            res = solve_generalized(p, functional)
    except EndpointSignError as exc:
        emit("phi_t0", exc.phi0)
        emit("phi_t1", exc.phi1)
        out.write(f"# error: {exc}\n")
        return EXIT_FAIL
    except NoFluxError as exc:
        out.write(f"# error: {exc}\n")
        return EXIT_FAIL
    _emit_noflux(emit, res, label)
    if args.out:
        meta = {"c_star": res.c_star, label: res.t_star, "phi_residual": res.phi_residual,
                "bisection_steps": res.bisection_steps}
        write_field_csv(args.out, res.solution, meta)
    return EXIT_OK if res.dirichlet_report.certified else EXIT_FAIL


def cmd_solve_noflux(args, out):
    return _noflux_common(args, out, NoFlux(), "t_star")


def cmd_solve_generalized(args, out):
    functional = load(args.file).functional
    if args.gamma is not None:
        functional = MeanTarget(args.gamma)
    if functional is None:
        raise InputError("solve-generalized needs a [functional] section or --gamma")
    return _noflux_common(args, out, functional, "lambda_star")


def cmd_sweep(args, out):
    pf = load(args.file)
    functional = pf.functional or NoFlux()
    prof = sweep_flux(pf.problem, functional, args.points)
    lines = ["t,c,phi,converged"]
    for s in prof.samples:
        lines.append(f"{fmt(s.t)},{fmt(s.c)},{fmt(s.phi)},{fmt(s.converged)}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        emit = Emitter(out)
        _head(emit, args, pf)
        emit("points", len(prof.samples))
        emit("all_converged", all(s.converged for s in prof.samples))
    else:
        out.write(text)
    return EXIT_OK if all(s.converged for s in prof.samples) else EXIT_FAIL


def cmd_verify(args, out):
    pf = load(args.file)
    p = pf.problem
    emit = Emitter(out)
    _head(emit, args, pf)
    if args.expr:
        cand = as_expression(args.expr)
    else:
        which = args.candidate or ("lower" if args.side == "sub" else "upper")
        cand = p.bracket.lower if which == "lower" else p.bracket.upper
    emit("side", args.side)
    emit("flavor", args.flavor)
    if args.flavor == "periodic":
        if p.grid.dim != 1:
            raise InputError("periodic flavor is one-dimensional only")
        ok = verify_1d_subsuper(cand, p.f, args.side)
        emit("passes", ok)
        return EXIT_OK if ok else EXIT_FAIL
    if args.flavor == "dirichlet" and args.c is None:
        raise InputError("--flavor dirichlet needs --c")
    rep = verify_sub_super(cand, p, args.flavor, args.side, c=args.c)
    emit("passes", rep.passes)
    emit("max_residual", rep.max_residual)
    emit("trace_ok", rep.trace_ok)
    emit("trace_spread", rep.trace_spread)
    if rep.flux is not None:
        emit("flux", rep.flux)
    out.write(f"# {rep.message}\n")
    return EXIT_OK if rep.passes else EXIT_FAIL


def cmd_oracle(args, out):
    pf = load(args.file)
    p = pf.problem
    if p.grid.dim != 1 or tuple(p.domain.bounds[0]) != (0.0, 1.0):
        raise InputError("oracle needs a 1D problem on [0, 1]")
    if not np.all(p.eval_a(np.zeros(p.grid.shape)) == 1.0) or p.a.variables - {"x"}:
        raise InputError("oracle needs a == 1")
    emit = Emitter(out)
    _head(emit, args, pf)
    if args.c_box:
        c_box = tuple(args.c_box)
    elif p.traces is not None:
        c_box = p.traces
    else:
        raise InputError("bracket traces are not constant; pass --c-box")
    if args.s_box:
        s_box = tuple(args.s_box)
    else:
        from .dirichlet import pick_cutoff_level
        n = pick_cutoff_level(p.bracket, p.grid, p.options.cutoff_safety)
        s_box = (-n, n)
    sols = periodic_shoot(p.f, c_box, s_box, grid=args.grid, steps=args.steps)
    emit("solutions", len(sols))
    if not sols:
        out.write("# no periodic solution found\n")
        return EXIT_FAIL
    for k, sol in enumerate(sols):
        emit(f"solution{k}", f"{fmt(sol.c)},{fmt(sol.s)},{fmt(sol.defect[0])},{fmt(sol.defect[1])}")
    if args.out:
        t, u, v = sols[0].trajectory
        lines = [f"# c={fmt(sols[0].c)}", f"# s={fmt(sols[0].s)}", "t,u,up"]
        lines += [f"{fmt(a)},{fmt(b)},{fmt(c)}" for a, b, c in zip(t, u, v)]
        Path(args.out).write_text("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_mms(args, out):
    pf = load(args.file)
    p = pf.problem
    exact = as_expression(args.exact)
    emit = Emitter(out)
    _head(emit, args, pf)
    errors = []
    ok = True
    for level in range(args.levels):
        n = tuple((m - 1) * 2 ** level + 1 for m in p.grid.n)
        q = p.with_grid(n)
        rep = solve_dirichlet(q, args.c)
        err = float(np.max(np.abs(rep.solution.values - q.grid.evaluate(exact).values)))
        errors.append(err)
        ok = ok and rep.certified
        emit(f"level{level}", f"{'x'.join(map(str, n))},{fmt(err)},{fmt(rep.converged)}")
    for k in range(1, len(errors)):
        order = math.log2(errors[k - 1] / errors[k]) if errors[k] > 0 else float("inf")
        emit(f"order{k - 1}_{k}", order)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_diff(args, out):
    ha, a = read_csv(args.a)
    hb, b = read_csv(args.b)
    if ha != hb or a.shape != b.shape:
        raise InputError("files have different layouts")
    emit = Emitter(out)
    emit("command", "diff")
    d = float(np.max(np.abs(a - b))) if a.size else 0.0
    emit("sup_norm", d)
    return EXIT_OK if d == 0.0 else EXIT_FAIL


# --- entry point ---------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="quasiflux", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"quasiflux {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("validate", help="sampled checks of the weight and growth hypotheses")
    sp.add_argument("file")
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("solve-dirichlet", help="constant-boundary Dirichlet solve")
    sp.add_argument("file")
    sp.add_argument("--c", type=float, required=True)
    sp.add_argument("--start", choices=["clamp", "lower", "upper"])
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_solve_dirichlet)

    sp = sub.add_parser("solve-noflux", help="no-flux problem by bisection on the boundary constant")
    sp.add_argument("file")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_solve_noflux)

    sp = sub.add_parser("solve-generalized", help="functional-constrained problem")
    sp.add_argument("file")
    sp.add_argument("--gamma", type=float, help="mean target (overrides [functional])")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_solve_generalized)

    sp = sub.add_parser("sweep", help="functional values along the homotopy")
    sp.add_argument("file")
    sp.add_argument("--points", type=int, default=11)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("verify", help="check a sub- or supersolution")
    sp.add_argument("file")
    sp.add_argument("--side", choices=["sub", "super"], required=True)
    sp.add_argument("--flavor", choices=["dirichlet", "noflux", "periodic"], default="noflux")
    sp.add_argument("--c", type=float)
    sp.add_argument("--candidate", choices=["lower", "upper"])
    sp.add_argument("--expr", help="candidate expression instead of a bracket member")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("oracle", help="1D periodic shooting oracle (a == 1)")
    sp.add_argument("file")
    sp.add_argument("--c-box", type=float, nargs=2)
    sp.add_argument("--s-box", type=float, nargs=2)
    sp.add_argument("--grid", type=int, default=21)
    sp.add_argument("--steps", type=int, default=1024)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("mms", help="refinement study against an exact solution")
    sp.add_argument("file")
    sp.add_argument("--exact", required=True, help="exact solution expression in x (and y)")
    sp.add_argument("--levels", type=int, default=2)
    sp.add_argument("--c", type=float, default=0.0)
    sp.set_defaults(func=cmd_mms)

    sp = sub.add_parser("diff", help="sup-norm difference of two CSV outputs")
    sp.add_argument("a")
    sp.add_argument("b")
    sp.set_defaults(func=cmd_diff)
    return ap


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    out.write(f"# quasiflux {__version__}\n")
    try:
        return args.func(args, out)
    except (ProblemFileError, ExpressionError, InputError, ModelError) as exc:
        if isinstance(exc, PreconditionError):
            out.write(f"# precondition failed: {exc}\n")
            return EXIT_FAIL
        sys.stderr.write(f"quasiflux: input error: {exc}\n")
        return EXIT_INPUT
    except ArithmeticError as exc:
        out.write(f"# error: {exc}\n")
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
