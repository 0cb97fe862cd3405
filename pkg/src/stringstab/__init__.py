"""String-stability analysis and control-parameter optimisation for
heterogeneous car-following traffic."""

from .chain import VehicleChain
from .idm import (
    DEFAULT_BOUNDS,
    IdmParams,
    LinearCoeffs,
    ParamDistribution,
    ParamLaw,
    VehicleKinematics,
    equilibrium_gap,
    idm_acceleration,
    linearize,
    sample_params,
)
from .ring import homogeneous_ring_roots, ring_asymptotically_stable, ring_matrix
from .simulate import (
    NormProfile,
    PrbsDisturbance,
    StepDisturbance,
    Trajectory,
    norm_profile,
    nonlinear_stability_sweep,
    prbs,
    simulate,
)
from .transfer import (
    StabilityReport,
    TfChainGain,
    analyze_chain,
    bounded_real_check,
    build_block_matrices,
    gamma_gain,
    hinf_chain,
    hinf_second_order,
    impulse_l1_norm,
    linf_step_monotone,
    mimo_sigma_max,
    string_stability_coefficient,
)
from .optimize import (
    ExperimentConfig,
    OptimizationProblem,
    OptimizationResult,
    SaConfig,
    experiment_30,
    objective,
    optimize_av,
    optimize_chain_avs,
    worst_case_augment,
)

__version__ = "0.1.0"
