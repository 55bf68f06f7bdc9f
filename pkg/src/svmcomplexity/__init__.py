"""Empirical risk minimization for affine and polynomial classifiers, with VC bounds,
information-complexity calculators and seeded Gaussian experiments."""

from .bounds import (
    BoundReport,
    VapnikBoundInputs,
    a_of_p,
    clipped_poly_deviation_bound,
    curly_E,
    info_complexity_asymptotic,
    info_complexity_numeric,
    poly_risk_deviation_bound,
    vapnik_relative_bound,
    vc_dim_affine,
    vc_dim_hinge_loss_family,
    vc_dim_polynomial,
)
from .datasets import ExperimentConfig, load_csv, load_wisconsin, reproduce_table, split
from .exceptions import (
    CountOverflowError,
    DataError,
    DimensionCapError,
    InvalidDistributionError,
    InvalidInputError,
    NotApplicableError,
    ParseError,
    UnboundedComplexityError,
    UndefinedClassRiskError,
)
from .experiments import (
    estimate_error_decomposition,
    fit_rate,
    rate_optimality_check,
    scale_search,
    theorem61_bound,
)
from .gaussian import (
    BayesQuadraticClassifier,
    GaussianClass,
    GaussianPair,
    QuadraticSurface,
    algorithmic_error_estimate,
    bayes_quadratic_surface,
    gaussian_linear_risk_exact,
    sample_pair,
    sigma_criterion,
    taylor_alg_error_bound,
    weighted_risk_mc,
)
from .model import (
    AffineSeparator,
    ClippedPolynomial,
    ConfusionCounts,
    Dataset,
    Hinge,
    MonomialLifter,
    Polynomial,
    PolynomialSeparator,
    Squared,
    classify,
    confusion,
    empirical_risk,
    lift,
    load_separator,
    monomial_count,
    save_separator,
    weighted_empirical_risk,
)
from .solver import (
    ERMClassifier,
    ERMRegressor,
    ForwardFeatureSelector,
    SolverConfig,
    TrainedModel,
    select_features,
    train_linear,
    train_polynomial,
)

__version__ = "0.1.0"
