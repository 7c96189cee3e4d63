"""Quasilinear elliptic solvers with Dirichlet (constant trace) and no-flux boundary conditions."""

__version__ = "0.1.0"

from ._kernels import BACKEND
from .dirichlet import (EnergyCertificate, PreconditionError, SolveReport, VerificationReport,
                        certify, energy_certificate, gradient_cutoff, solve_dirichlet, truncate,
                        verify_sub_super)
from .discretize import (FrozenOperator, LinearSolveError, VectorField, assemble_frozen,
                         boundary_flux_conservative, flux_interior, gradient, h1_seminorm,
                         interior_integral, solve_linear)
from .expr import (Expression, ExpressionError, ExprSyntaxError, UnboundVariableError,
                   UnknownIdentifierError, evaluate, parse, pretty)
from .model import (Bracket, Grid, Interval1D, ModelError, ProblemSpec, Rectangle2D, ScalarField,
                    SolverOptions, ValidationError, WeightReport, build_grid, check_bn, estimate_bn,
                    validate_weight)
from .noflux import (BisectionError, Custom, EndpointSignError, FluxProfile, FluxSample, MeanTarget,
                     MonotoneFunctional, NoFlux, NoFluxError, NoFluxResult, homotopy_value,
                     solve_generalized, solve_noflux, sweep_flux)
from .oracle1d import IVPBlowUp, PeriodicSolution, integrate_ivp, periodic_shoot, verify_1d_subsuper
