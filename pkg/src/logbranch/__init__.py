"""Logistic branching processes in a Brownian environment.

Classification (explosion, extinction, recurrence), Laplace transforms of
hitting times through a Riccati equation, invariant laws, scale functions
of branching diffusions and a Monte Carlo simulator to check them.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .analytic import (
    InvariantLaw,
    MFunction,
    TimeScale,
    cbi_laplace,
    f_lambda,
    invariant_law,
    m_direct,
    m_levy_rep,
    r_coeff,
    time_scale,
    total_pop_laplace,
)
from .conditions import ClassificationReport, Recurrence, analyze, conservativeness, polarity, recurrence
from .diffusion import (
    DiffusionModel,
    Linear,
    Logistic,
    PiecewisePolynomial,
    ScaleFunction,
    TabulatedInteraction,
    extinction_criterion,
    hit_prob,
    laplace_Ta_diffusion,
    scale_function,
    scale_inf,
    scale_S,
)
from .errors import (
    ClassificationFailedError,
    DomainError,
    LogBranchError,
    NonIntegrableError,
    NumericOverflowError,
    SolverFailureError,
    TruncationError,
    UndecidableError,
    UnreliableEstimateError,
    ValidityWarning,
)
from .hitting import (
    HLambda,
    MeanExtinction,
    generator_residual,
    h_lambda,
    h_lambda_table,
    h_lambda_zero,
    laplace_Ta,
    mean_T0,
    mean_extinction,
)
from .mechanisms import (
    BranchingMechanism,
    CompoundPoissonExp,
    GammaTail,
    ModelSpec,
    NoJumps,
    Stable,
    TabulatedTail,
    check_grey,
    classify,
    omega,
    psi,
)
from .modelio import load_model, model_from_dict, model_to_dict
from .quadrature import QuadratureConfig, Trilean, Verdict
from .riccati import RiccatiConfig, RiccatiSolution, solve_y, solve_ybar
from .simulator import (
    Scheme,
    SimConfig,
    estimate_hitting,
    estimate_laplace,
    estimate_total_pop,
    ks_two_sample,
    simulate,
    simulate_direct,
    simulate_lamperti,
)
