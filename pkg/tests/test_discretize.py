import numpy as np
import pytest

from quasiflux.discretize import (LinearSolveError, assemble_frozen, boundary_flux_conservative,
                                  flux_interior, gradient, h1_seminorm, interior_integral, solve_linear)
from quasiflux.expr import parse
from quasiflux.model import Interval1D, ModelError, Rectangle2D, ScalarField, build_grid

UNIT = Interval1D(0.0, 1.0)
SQUARE = Rectangle2D(0.0, 1.0, 0.0, 1.0)


def field(grid, src):
    return grid.evaluate(parse(src))


def const(grid, v):
    return ScalarField(grid, np.full(grid.shape, float(v)))


@pytest.mark.parametrize("domain", [UNIT, SQUARE])
def test_gradient_of_constant_vanishes(domain):
    g = build_grid(domain, 9)
    assert np.all(gradient(const(g, 3.0)).as_array() == 0.0)


def test_gradient_affine_exact():
    g = build_grid(UNIT, 11)
    np.testing.assert_allclose(gradient(field(g, "x")).as_array()[0], 1.0, atol=1e-12)
    g2 = build_grid(SQUARE, 7)
    gr = gradient(field(g2, "2*x - 3*y + 1")).as_array()
    np.testing.assert_allclose(gr[0], 2.0, atol=1e-12)
    np.testing.assert_allclose(gr[1], -3.0, atol=1e-12)


def test_gradient_quadratic_central():
    g = build_grid(UNIT, 5)
    assert gradient(field(g, "x^2")).as_array()[0][2] == 1.0


def test_laplacian_stencil():
    g = build_grid(UNIT, 5)
    A = assemble_frozen(g, const(g, 1.0)).to_sparse().toarray()
    h2 = g.h[0] ** 2
    np.testing.assert_allclose(A[1, :] * h2, [-1.0, 2.0, -1.0])
    A2 = assemble_frozen(g, const(g, 2.0)).to_sparse().toarray()
    np.testing.assert_array_equal(A2, 2 * A)


def test_face_means():
    g = build_grid(UNIT, 3)
    op = assemble_frozen(g, field(g, "1 + x"))
    (faces,) = op.faces
    np.testing.assert_allclose(faces, [1.25, 1.75])
    g = build_grid(UNIT, 5)
    (faces,) = assemble_frozen(g, field(g, "1 + x")).faces
    assert faces[1] == pytest.approx((1.25 + 1.5) / 2) and faces[2] == pytest.approx((1.5 + 1.75) / 2)


def test_nonpositive_faces_rejected():
    g = build_grid(UNIT, 5)
    with pytest.raises(ModelError):
        assemble_frozen(g, field(g, "x - 0.5"))


@pytest.mark.parametrize("domain", [UNIT, SQUARE])
def test_operator_symmetric(domain):
    g = build_grid(domain, 6)
    A = assemble_frozen(g, field(g, "1 + x*x + 0.3*y")).to_sparse().toarray()
    np.testing.assert_allclose(A, A.T, rtol=1e-14)


@pytest.mark.parametrize("domain", [UNIT, SQUARE])
def test_zero_load_gives_constant(domain):
    g = build_grid(domain, 17)
    op = assemble_frozen(g, field(g, "2 + x"))
    u, res = solve_linear(op, const(g, 0.0), 0.7)
    assert np.max(np.abs(u.values - 0.7)) <= 1e-12
    assert res <= 1e-12


def test_quadratic_exact():
    g = build_grid(UNIT, 33)
    u, _ = solve_linear(assemble_frozen(g, const(g, 1.0)), const(g, 1.0), 0.0)
    np.testing.assert_allclose(u.values, field(g, "x*(1-x)/2").values, atol=1e-12)


def test_2d_residual_within_tolerance():
    g = build_grid(SQUARE, 33)
    rhs = field(g, "2*pi^2*sin(pi*x)*sin(pi*y)")
    op = assemble_frozen(g, field(g, "1 + x*y"))
    u, res = solve_linear(op, rhs, 0.25, lin_tol=1e-10)
    assert np.all(u.boundary_values == 0.25)
    assert res <= 1e-10 * (1 + np.abs(rhs.values).max())
    assert np.max(np.abs(op.apply(u) - rhs.values)[g.interior]) == pytest.approx(res)


def test_linear_solve_failure_carries_residual():
    g = build_grid(SQUARE, 33)
    rhs = field(g, "sin(3*x)*y")
    with pytest.raises(LinearSolveError) as info:
        solve_linear(assemble_frozen(g, const(g, 1.0)), rhs, 0.0, lin_tol=1e-14, maxiter=2)
    assert info.value.residual > 0


def test_integrals():
    g = build_grid(UNIT, 65)
    assert interior_integral(const(g, 1.0)) == pytest.approx(1.0, abs=1e-15)
    assert interior_integral(field(g, "x")) == pytest.approx(0.5, abs=1e-12)
    assert abs(interior_integral(field(g, "sin(2*pi*x)"))) <= 1e-12
    g2 = build_grid(Rectangle2D(0, 2, 0, 3), 9)
    assert interior_integral(const(g2, 1.0)) == pytest.approx(6.0, abs=1e-12)


def test_seminorm():
    g = build_grid(UNIT, 129)
    assert h1_seminorm(const(g, 4.0)) == 0.0
    assert h1_seminorm(field(g, "x")) == pytest.approx(1.0, abs=1e-12)
    assert h1_seminorm(field(g, "sin(pi*x)")) == pytest.approx(np.pi / np.sqrt(2), abs=1e-3)


def test_flux_of_constant_is_zero():
    g = build_grid(SQUARE, 9)
    assert boundary_flux_conservative(const(g, 2.0), const(g, 1.5)) == 0.0


def test_flux_requires_constant_trace():
    g = build_grid(UNIT, 9)
    with pytest.raises(ModelError):
        boundary_flux_conservative(field(g, "x"), const(g, 1.0))


def test_flux_quadratic_1d():
    g = build_grid(UNIT, 65)
    u = field(g, "x*(1-x)/2")
    flux = boundary_flux_conservative(u, const(g, 1.0))
    h = g.h[0]
    assert flux == pytest.approx(-(1 - h), abs=1e-13)  # interior rows only
    assert flux == pytest.approx(-1.0, abs=2 * h)


@pytest.mark.parametrize("domain, a", [(UNIT, "1 + x^2"), (SQUARE, "1 + x + y*y")])
def test_summation_by_parts(domain, a):
    g = build_grid(domain, 21)
    u = field(g, "0.3 + sin(pi*x)*(1 + y)*x*(1-x)" if g.dim == 1 else "0.3 + sin(pi*x)*sin(pi*y)*(1+x)")
    av = field(g, a)
    load = assemble_frozen(g, av).apply(u)
    total = boundary_flux_conservative(u, av, tol=1e-14) + interior_integral(ScalarField(g, load))
    scale = np.sum(np.abs(load) * g.volume_weights)
    assert abs(total) <= 1e-10 * scale


def test_flux_interior(make_problem):
    p = make_problem("0")
    assert flux_interior(p, const(p.grid, 0.2)) == 0.0
    p = make_problem("1")
    assert flux_interior(p, const(p.grid, 0.2)) == pytest.approx(-1.0, abs=1e-14)
    p = make_problem("sin(2*pi*x)", n=65)
    assert abs(flux_interior(p, field(p.grid, "0.4 + sin(2*pi*x)/(4*pi^2)"))) <= 1e-12
