"""Monte Carlo laboratory for exponential functionals of Lévy processes."""

from .levy_spec import (
    ConditionReport,
    IndependentXiEta,
    JointCompoundPoisson,
    LevyMeasure,
    LevyTriplet,
    ULForm,
    UL_to_xi_eta,
    check_convergence,
    eval_exponent,
    measure_integral,
    xi_eta_to_UL,
)
from .pathsim import PathGrid, RngStream, sample_cpp_path, sample_increments
from .expfun import (
    ExpFunSample,
    TruncationReport,
    estimate_cpp_series,
    estimate_euler,
    estimate_event_driven,
    fixed_point_series,
    gou_path,
    simulate_functional,
)
from .charstats import CFGrid, empirical_cf, ks_distance, weighted_moment_cf, zero_mask
from .generator import TestFunction, apply_generator_ul, apply_generator_xieta, semigroup_estimate, stationarity_residual
from .relations import ExponentGrid, cpp_relation_residual, invert_eta, invert_xi, laplace_residual, residual_compact
from .oracles import OracleCase, continuity_counterexample_spec, dependent_pair, stationary_levy_tail
from .harness import ContinuitySuiteReport, ExperimentConfig, continuity_suite, run_config

__version__ = "0.1.0"
