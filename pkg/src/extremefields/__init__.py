"""extremefields: a simulation laboratory for suprema of stationary Gaussian
random fields.

Exact evaluation of the limiting mixed-Gumbel law, exact grid samplers for
weakly and strongly dependent correlation models, Pickands-constant
estimation from fractional Brownian motion, and reproducible Monte Carlo
experiments measuring convergence to the limit.
"""

from .fields import (
    CorrelationModel,
    FieldSample,
    MixtureFieldSpec,
    build_sampler,
    correlation,
    sample_field,
    verify_A1,
    verify_A3,
)
from .geometry import (
    BudgetError,
    CDescriptor,
    GridSpec,
    JordanSet,
    ScalingPlan,
    build_grid,
    evaluate_m_i,
    inner_outer_approx,
    measure,
    scale_set,
)
from .limit_law import (
    LimitLawParams,
    QuadratureSpec,
    TailAsymptotics,
    limit_cdf,
    lognormal_mixture_cdf,
    m_ratio_limit,
    normal_tail,
    specialization_coefficients,
    tail_constant_m,
    u_z_transform,
)
from .montecarlo import (
    ExperimentReport,
    SupExperimentConfig,
    convergence_study,
    corollary_experiments,
    discretization_gap,
    estimate_sup_cdf,
    lemma2_sum,
    lemma3_sum,
    piterbarg_tail_check,
    wilson_interval,
)
from .pickands import (
    FbmSpec,
    PickandsEstimate,
    closed_form_pickands,
    estimate_pickands,
    simulate_fbm,
)

__version__ = "0.1.0"
