"""Correlation-based significance testing for single coefficients in
high-dimensional linear regression, with constrained-l1 adaptive
estimators, test-inversion confidence intervals, a debiased-Lasso
comparator, and a reproducible Monte Carlo harness.
"""

from .errors import (
    ConstructionError,
    ConvergenceError,
    CorrtError,
    DataError,
    DegenerateStatisticError,
    EstimationError,
    HarnessError,
    SolverError,
)
from .stats import (
    RngStream,
    ToeplitzSpec,
    corrt_local_power,
    draw_design,
    normal_cdf,
    normal_quantile,
    wald_size_distortion,
)
from .simplex import LPResult, ParametricLP, solve_at, solve_path
from .programs import (
    Dataset,
    RegressionProgram,
    build_gamma_program,
    build_theta_program,
    extract_coefficients,
    tuning_criterion,
)
from .estimators import (
    AdaptiveFit,
    Membership,
    fallback_level,
    fit_gamma,
    fit_theta,
    membership,
    select_a_hat,
)
from .inference import (
    ConfidenceSet,
    FitMeta,
    TestReport,
    confidence_interval,
    statistic,
    test,
)
from .baselines import (
    DebiasedEstimate,
    LassoFit,
    debiased_lasso,
    debiased_wald_test,
    default_penalty,
    lasso,
)
from .montecarlo import (
    DgpSpec,
    McResult,
    RepRecord,
    generate,
    generate_with_truth,
    power_curve,
    run_mc,
    to_csv,
    to_json,
)

__version__ = "0.1.0"
