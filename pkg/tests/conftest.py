import numpy as np
import pytest

from quasiflux import Bracket, Interval1D, ProblemSpec, Rectangle2D, SolverOptions, build_grid, parse

SIN_F = "sin(2*pi*x) - s"
SIN_EXACT = 1.0 / (1.0 + 4.0 * np.pi ** 2)  # amplitude of the periodic solution


def problem(f, n=65, a="1", lower=-1, upper=1, a2=2, b2=0.0, domain=None, **options):
    domain = domain or Interval1D(0.0, 1.0)
    return ProblemSpec(build_grid(domain, n), parse(str(a)), parse(str(f)),
                       Bracket(parse(str(lower)), parse(str(upper)), parse(str(a2)), b2),
                       SolverOptions(**options))


def square(n, f, **kw):
    return problem(f, n, domain=Rectangle2D(0.0, 1.0, 0.0, 1.0), **kw)


@pytest.fixture
def make_problem():
    return problem
