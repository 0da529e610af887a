"""Condition-based maintenance planning for multi-component systems with a shared setup cost."""

from .degradation import (
    DomainError,
    GammaProcessParams,
    StateGrid,
    build_transition_matrix,
    compound_gamma_increment_cdf,
    gamma_increment_cdf,
    make_state_grid,
)
from .model import (
    ComponentSpec,
    InfeasiblePartition,
    MaintenancePlan,
    Partition,
    StageDecision,
    SystemInstance,
    instance_from_dict,
    instance_to_dict,
    second_stage_policy,
    two_stage_total_cost,
    validate_instance,
)
from .solvers import (
    Algo1Trace,
    Algo2Config,
    GuardExceeded,
    algorithm1,
    algorithm2,
    brute_force_two_stage,
    exact_multistage,
    rolling_horizon_step,
    simulate_rolling_horizon,
)
from .structural import delta_r, delta_s, rho, standalone_decision

__version__ = "0.1.0"
