"""INI-style problem files.

Example::

    [domain]
    kind = interval          # or rectangle
    x0 = 0
    x1 = 1
    nodes = 257              # per axis; "33, 65" for distinct counts

    [equation]
    a = 1
    f = sin(2*pi*x) - s

    [bracket]
    lower = -1
    upper = 1
    a2 = 2
    b2 = 0

    [solver]                 # optional overrides of SolverOptions
    damping = 0.7

    [functional]             # optional; for solve-generalized
    kind = mean_target
    gamma = 0.5

Lines starting with ``#`` or ``;`` are comments. Unknown sections and keys
are errors.
"""
from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

from .expr import ExpressionError, parse
from .model import (Bracket, Interval1D, ModelError, ProblemSpec, Rectangle2D, SolverOptions,
                    build_grid)

SECTIONS = {
    "domain": {"kind", "x0", "x1", "y0", "y1", "nodes"},
    "equation": {"a", "f"},
    "bracket": {"lower", "upper", "a2", "b2"},
    "solver": {f.name for f in fields(SolverOptions)},
    "functional": {"kind", "gamma"},
}
REQUIRED = ("domain", "equation", "bracket")


class ProblemFileError(ValueError):
    """Malformed or inconsistent problem file (maps to exit code 2)."""


@dataclass(frozen=True, eq=False)
class ProblemFile:
    problem: ProblemSpec
    functional: Optional[object]
    digest: str
    source: str


def _float(sec, key, raw):
    try:
        return float(raw)
    except ValueError:
        raise ProblemFileError(f"[{sec}] {key}: expected a real number, got {raw!r}") from None


def _expr(sec, key, raw):
    try:
        return parse(raw)
    except ExpressionError as exc:
        raise ProblemFileError(f"[{sec}] {key}: {exc}") from None


def _solver_options(items: dict) -> SolverOptions:
    kw = {}
    types = {f.name: f.type for f in fields(SolverOptions)}
    for key, raw in items.items():
        t = str(types[key])
        try:
            if key in ("max_picard", "lin_maxiter"):
                kw[key] = int(raw)
            elif key == "start":
                kw[key] = raw.strip()
            elif raw.strip().lower() in ("", "none") and "Optional" in t:
                kw[key] = None
            else:
                kw[key] = float(raw)
        except ValueError:
            raise ProblemFileError(f"[solver] {key}: cannot parse {raw!r}") from None
    try:
        return SolverOptions(**kw)
    except ModelError as exc:
        raise ProblemFileError(f"[solver] {exc}") from None


def _functional(items: dict):
    from .noflux import MeanTarget, NoFlux

    kind = items.get("kind", "noflux").strip().lower()
    if kind == "noflux":
        if "gamma" in items:
            raise ProblemFileError("[functional] gamma is only valid for kind = mean_target")
        return NoFlux()
    if kind == "mean_target":
        return MeanTarget(_float("functional", "gamma", items.get("gamma", "0")))
    raise ProblemFileError(f"[functional] unknown kind {kind!r} (noflux | mean_target)")


def loads(text: str, name: str = "<string>") -> ProblemFile:
    cp = configparser.ConfigParser(comment_prefixes=("#", ";"), inline_comment_prefixes=("#",),
                                   interpolation=None, default_section="__none__")
    cp.optionxform = str
    try:
        cp.read_string(text, source=name)
    except configparser.Error as exc:
        raise ProblemFileError(f"{name}: {exc}") from None

    for sec in cp.sections():
        if sec not in SECTIONS:
            raise ProblemFileError(f"{name}: unknown section [{sec}]")
        unknown = set(cp[sec]) - SECTIONS[sec]
        if unknown:
            raise ProblemFileError(f"{name}: unknown key(s) in [{sec}]: {', '.join(sorted(unknown))}")
    for sec in REQUIRED:
        if sec not in cp:
            raise ProblemFileError(f"{name}: missing section [{sec}]")

    d = cp["domain"]
    kind = d.get("kind", "interval").strip().lower()
    try:
        if kind == "interval":
            domain = Interval1D(_float("domain", "x0", d.get("x0", "0")), _float("domain", "x1", d.get("x1", "1")))
        elif kind == "rectangle":
            domain = Rectangle2D(_float("domain", "x0", d.get("x0", "0")), _float("domain", "x1", d.get("x1", "1")),
                                 _float("domain", "y0", d.get("y0", "0")), _float("domain", "y1", d.get("y1", "1")))
        else:
            raise ProblemFileError(f"[domain] unknown kind {kind!r} (interval | rectangle)")
        if "nodes" not in d:
            raise ProblemFileError("[domain] nodes is required")
        try:
            nodes = [int(v) for v in d["nodes"].split(",")]
        except ValueError:
            raise ProblemFileError(f"[domain] nodes: expected integer(s), got {d['nodes']!r}") from None
        grid = build_grid(domain, nodes[0] if len(nodes) == 1 else nodes)
    except ModelError as exc:
        raise ProblemFileError(f"[domain] {exc}") from None

    eq = cp["equation"]
    for key in ("a", "f"):
        if key not in eq:
            raise ProblemFileError(f"[equation] {key} is required")
    a = _expr("equation", "a", eq["a"])
    f = _expr("equation", "f", eq["f"])

    br = cp["bracket"]
    for key in ("lower", "upper"):
        if key not in br:
            raise ProblemFileError(f"[bracket] {key} is required")
    try:
        bracket = Bracket(_expr("bracket", "lower", br["lower"]), _expr("bracket", "upper", br["upper"]),
                          _expr("bracket", "a2", br.get("a2", "0")), _float("bracket", "b2", br.get("b2", "0")))
    except ModelError as exc:
        raise ProblemFileError(f"[bracket] {exc}") from None

    options = _solver_options(dict(cp["solver"])) if "solver" in cp else SolverOptions()
    functional = _functional(dict(cp["functional"])) if "functional" in cp else None
    digest = hashlib.sha256(text.encode()).hexdigest()[:16]
    return ProblemFile(ProblemSpec(grid, a, f, bracket, options), functional, digest, name)


def load(path) -> ProblemFile:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ProblemFileError(f"cannot read {path}: {exc}") from None
    return loads(text, str(path))
