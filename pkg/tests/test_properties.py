"""Randomised invariants (1000 examples each)."""
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from quasiflux.dirichlet import gradient_cutoff, truncate
from quasiflux.discretize import assemble_frozen, boundary_flux_conservative, interior_integral, solve_linear
from quasiflux.expr import evaluate, parse, pretty
from quasiflux.model import (Bracket, Interval1D, Rectangle2D, ScalarField, build_grid, estimate_bn,
                             validate_weight)
from quasiflux.noflux import homotopy_value

pytestmark = pytest.mark.properties

MANY = settings(max_examples=1000, deadline=None)
finite = st.floats(-1e6, 1e6, allow_nan=False)
small = st.floats(-10, 10, allow_nan=False)


@st.composite
def grids(draw, max_nodes=9):
    if draw(st.booleans()):
        x0 = draw(small)
        return build_grid(Interval1D(x0, x0 + draw(st.floats(0.1, 5))), draw(st.integers(3, max_nodes)))
    x0, y0 = draw(small), draw(small)
    dom = Rectangle2D(x0, x0 + draw(st.floats(0.1, 5)), y0, y0 + draw(st.floats(0.1, 5)))
    return build_grid(dom, (draw(st.integers(3, max_nodes)), draw(st.integers(3, max_nodes))))


@st.composite
def field_and_bracket(draw):
    g = draw(grids())
    u = draw(arrays(float, g.shape, elements=finite))
    lo = draw(arrays(float, g.shape, elements=finite))
    gap = draw(arrays(float, g.shape, elements=st.floats(0, 1e6)))
    return ScalarField(g, u), ScalarField(g, lo), ScalarField(g, lo + gap)


@MANY
@given(field_and_bracket())
def test_truncate_idempotent_and_inside(data):
    u, lo, up = data
    once = truncate(u, (lo, up))
    assert np.all(lo.values <= once.values) and np.all(once.values <= up.values)
    assert np.array_equal(truncate(once, (lo, up)).values, once.values)
    inside = (lo.values <= u.values) & (u.values <= up.values)
    assert np.array_equal(once.values[inside], u.values[inside])


vectors = st.integers(1, 3).flatmap(lambda d: arrays(float, d, elements=st.floats(-1e3, 1e3)))


@MANY
@given(vectors, st.floats(1e-3, 1e3))
def test_cutoff_norm_and_direction(p, n):
    q = gradient_cutoff(p, n)
    norm_p, norm_q = np.linalg.norm(p), np.linalg.norm(q)
    assert norm_q <= min(norm_p, n) * (1 + 1e-12)
    # nonnegative multiple of p
    k = int(np.argmax(np.abs(p)))
    if norm_p > 0:
        lam = q[k] / p[k]
        assert lam >= 0
        np.testing.assert_allclose(q, lam * p, rtol=1e-12, atol=1e-300)


@MANY
@given(vectors, st.floats(1e-3, 1e3))
def test_cutoff_identity_below_threshold(p, n):
    q = gradient_cutoff(p, n)
    if np.linalg.norm(p) <= n:
        assert np.array_equal(q, p)
    else:
        assert not np.array_equal(q, p)
        assert np.linalg.norm(q) == pytest.approx(n, rel=1e-12)


@MANY
@given(finite, finite, st.floats(0, 1))
def test_homotopy_endpoints_and_range(alpha, beta, t):
    assert homotopy_value(0.0, alpha, beta) == alpha
    assert homotopy_value(1.0, alpha, beta) == beta
    c = homotopy_value(t, alpha, beta)
    lo, hi = min(alpha, beta), max(alpha, beta)
    slack = 1e-12 * (abs(alpha) + abs(beta))
    assert lo - slack <= c <= hi + slack


@st.composite
def max_principle_case(draw):
    g = draw(grids(max_nodes=8))
    a = draw(arrays(float, g.shape, elements=st.floats(1, 50)))
    rhs = draw(arrays(float, g.shape, elements=st.floats(-100, 0)))
    c = draw(small)
    return g, a, rhs, c


@MANY
@given(max_principle_case())
def test_discrete_maximum_principle(case):
    g, a, rhs, c = case
    u, _ = solve_linear(assemble_frozen(g, ScalarField(g, a)), ScalarField(g, rhs), c)
    assert np.all(u.boundary_values == c)
    assert np.all(u.values <= c + 1e-9 * (1 + abs(c)))


@MANY
@given(grids(), st.data())
def test_summation_by_parts(g, data):
    a = data.draw(arrays(float, g.shape, elements=st.floats(1, 10)))
    u = data.draw(arrays(float, g.shape, elements=st.floats(-1, 1)))
    u[g.boundary_mask] = data.draw(small)
    load = assemble_frozen(g, ScalarField(g, a)).apply(u)
    total = boundary_flux_conservative(ScalarField(g, u), ScalarField(g, a)) \
        + interior_integral(ScalarField(g, load))
    assert abs(total) <= 1e-10 * (1 + np.sum(np.abs(load) * g.volume_weights))


@MANY
@given(grids())
def test_operator_symmetric(g):
    rng = np.random.default_rng(g.shape[0] * 31 + g.dim)
    A = assemble_frozen(g, ScalarField(g, 1 + rng.random(g.shape))).to_sparse().toarray()
    assert np.array_equal(A, A.T)


@MANY
@given(grids())
def test_surface_weights_sum_to_perimeter(g):
    lengths = [b - a for a, b in g.domain.bounds]
    expect = 2.0 if g.dim == 1 else 2 * (lengths[0] + lengths[1])
    assert np.sum(g.surface_weights) == pytest.approx(expect, abs=1e-12 * (1 + expect))


@MANY
@given(grids(), small, st.floats(0, 10))
def test_unit_weight_always_passes(g, s0, width):
    assert validate_weight(parse("1"), g, (s0, s0 + width), samples=5).passes


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 5), st.floats(0, 3), st.floats(0.5, 20), st.floats(1.0, 4.0))
def test_bn_monotone_for_quadratic_growth(c0, k, p_max, factor):
    g = build_grid(Interval1D(0, 1), 5)
    f = parse(f"{c0!r} + {k!r}*p1^2 + s")
    b_small = estimate_bn(f, g, Bracket(-1, 1), p_max)[1]
    b_large = estimate_bn(f, g, Bracket(-1, 1), p_max * factor)[1]
    assert b_large >= b_small - 1e-12


# --- parser precedence against Python's grammar ----------------------------

@st.composite
def arith(draw, depth=0):
    if depth > 2 or draw(st.integers(0, 2)) == 0:
        return f"{draw(st.integers(1, 9))}.0"  # float literal: Python raises on overflow
    kind = draw(st.sampled_from(["bin", "bin", "bin", "neg", "paren"]))
    if kind == "neg":
        return "-" + draw(arith(depth + 1))
    if kind == "paren":
        return "(" + draw(arith(depth + 1)) + ")"
    op = draw(st.sampled_from(["+", "-", "*", "/", "^"]))
    return draw(arith(depth + 1)) + f" {op} " + draw(arith(depth + 1))


@MANY
@given(arith())
def test_precedence_matches_python(src):
    try:
        expect = eval(src.replace("^", "**"), {"__builtins__": {}})
    except (ZeroDivisionError, OverflowError):
        assume(False)
    assume(not isinstance(expect, complex))
    expect = float(expect)
    assume(math.isfinite(expect) and abs(expect) < 1e200)
    got = evaluate(parse(src), {})
    assert got == pytest.approx(expect, rel=1e-9, abs=1e-300)


@MANY
@given(arith())
def test_pretty_roundtrip(src):
    e = parse(src)
    again = parse(pretty(e))
    assert again.root == e.root
