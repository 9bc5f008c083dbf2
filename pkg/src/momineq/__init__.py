"""Tests and confidence sets under many moment inequalities.

The package tests nulls of the form h(theta) = eta when theta is only
partially identified by moment inequalities, profiling a studentized
min-max statistic over the null set and calibrating it with multiplier
bootstrap or self-normalized critical values.  Closed-form analytics for
the min-max of an iid Gaussian array and a simulation harness round out
the toolkit.
"""

from .analytics import (
    DensityBounds,
    McDensity,
    MinMaxGaussianSpec,
    density_bounds,
    iid_normal_sampler,
    mc_minmax_density,
    minmax_cdf,
    minmax_density,
)
from .bootstrap import (
    BootstrapEnsemble,
    CriticalValue,
    MultiplierDraw,
    build_ensembles,
    center_terms,
    critical_value,
    draw_multiplier,
    dr_statistic,
    mr_statistic,
    multiplier_matrix,
    pr_statistic,
)
from .errors import (
    ConfigError,
    DataError,
    EmptyGrid,
    EmptyModel,
    GammaOutOfRange,
    InfeasibleRestriction,
    KappaTooSmall,
    MissingColumn,
    MissingRequired,
    MomineqError,
    NegativeInstrumentValue,
    NoFiniteValue,
    NonNumericCell,
    QuantileExceedsRoot,
    ThetaOutOfBox,
    TooFewRows,
    TypeMismatch,
    UnknownKey,
)
from .inference import (
    METHODS,
    ConfidenceSet,
    DgpSpec,
    InferenceConfig,
    SimulationResult,
    TestReport,
    available_dgps,
    builtin_dgp,
    confidence_set,
    register_dgp,
    run_test,
    simulate_rejection_rate,
)
from .model import (
    ConditionalMoments,
    MomentModel,
    Sample,
    StandardizedMoments,
    convert_equalities,
    instrument_expand,
    load_csv,
    standardize,
    studentize,
)
from .optimize import NullRestriction, OptimCfg, ProfiledFit, dense_grid, profile_min
from .sn import (
    SnSearchCfg,
    SnTwoStepState,
    norm_quantile,
    sn_critical_value,
    sn_two_step,
)
from .statistic import (
    MinMaxResult,
    StatisticConfig,
    minmax_statistic,
    psi_sets,
    selected_indices,
    stud_objective,
)
from .tuning import (
    KappaSelection,
    LbarEstimate,
    TuningReport,
    anti_concentration,
    anti_concentration_lbar,
    default_wbar_gamma,
    estimate_wbar,
    kappa_grid,
    rate_diagnostic,
    select_kappa,
)

__version__ = "0.1.0"

__all__ = [
    "BootstrapEnsemble",
    "ConditionalMoments",
    "ConfidenceSet",
    "ConfigError",
    "CriticalValue",
    "DataError",
    "DensityBounds",
    "DgpSpec",
    "EmptyGrid",
    "EmptyModel",
    "GammaOutOfRange",
    "InfeasibleRestriction",
    "InferenceConfig",
    "KappaSelection",
    "KappaTooSmall",
    "LbarEstimate",
    "METHODS",
    "McDensity",
    "MinMaxGaussianSpec",
    "MinMaxResult",
    "MissingColumn",
    "MissingRequired",
    "MomentModel",
    "MomineqError",
    "MultiplierDraw",
    "NegativeInstrumentValue",
    "NoFiniteValue",
    "NonNumericCell",
    "NullRestriction",
    "OptimCfg",
    "ProfiledFit",
    "QuantileExceedsRoot",
    "Sample",
    "SimulationResult",
    "SnSearchCfg",
    "SnTwoStepState",
    "StandardizedMoments",
    "StatisticConfig",
    "TestReport",
    "ThetaOutOfBox",
    "TooFewRows",
    "TuningReport",
    "TypeMismatch",
    "UnknownKey",
    "anti_concentration",
    "anti_concentration_lbar",
    "available_dgps",
    "build_ensembles",
    "builtin_dgp",
    "center_terms",
    "confidence_set",
    "convert_equalities",
    "critical_value",
    "default_wbar_gamma",
    "dense_grid",
    "density_bounds",
    "dr_statistic",
    "draw_multiplier",
    "estimate_wbar",
    "iid_normal_sampler",
    "instrument_expand",
    "kappa_grid",
    "load_csv",
    "mc_minmax_density",
    "minmax_cdf",
    "minmax_density",
    "minmax_statistic",
    "mr_statistic",
    "multiplier_matrix",
    "norm_quantile",
    "pr_statistic",
    "profile_min",
    "psi_sets",
    "rate_diagnostic",
    "register_dgp",
    "run_test",
    "select_kappa",
    "selected_indices",
    "simulate_rejection_rate",
    "sn_critical_value",
    "sn_two_step",
    "standardize",
    "stud_objective",
    "studentize",
    "__version__",
]
