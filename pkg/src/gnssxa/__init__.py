"""Pseudorange-level GNSS simulation: PVT solving, cross-authentication
checks, spoofing-attack synthesis and detection statistics."""

__version__ = "0.1.0"

from .analysis import (
    DetCurve,
    MetricStats,
    QuadFormModel,
    det_closed_form,
    det_closed_form_mixture,
    metric_stats,
    pmd_closed_form,
    q_func,
    q_inv,
    quadform_model,
    threshold_from_pfa,
    wilson_interval,
)
from .attacks import (
    FeasibleSpace,
    PositionGeneration,
    PositionRelay,
    TamperVector,
    TimeTargeted,
    feasible_space,
    generation_attack_position,
    plan_time_attack,
    relay_attack_position,
    time_attack_exact,
    time_attack_minimize,
)
from .checks import (
    CheckVerdict,
    PositionCheckConfig,
    TimeCheckConfig,
    isb_check,
    position_check,
    time_check,
)
from .errors import *  # noqa: F401,F403
from .geometry import GeometrySet, NullSpaceBasis, build_geometry, dop, null_space, pseudoinverse
from .harness import ExperimentConfig, ExperimentResult, empirical_det, run_experiment, sweep_target_distance
from .model import C_LIGHT
from .pvt import PvtSolution, SolveReport, SolverConfig, apply_tamper, predict_pseudorange, solve
from .scenario import (
    Epoch,
    NoiseModel,
    SatelliteObservation,
    Scenario,
    add_noise,
    generate_scenario,
    load_scenario,
    save_scenario,
)
