from .multistage import (
    ExactSolution,
    SimulationSummary,
    exact_multistage,
    rolling_horizon_step,
    simulate_rolling_horizon,
)
from .two_stage import (
    Algo1Trace,
    Algo2Config,
    GuardExceeded,
    SolveTimeout,
    algorithm1,
    algorithm2,
    brute_force_two_stage,
    solve_two_stage,
)

__all__ = [
    "Algo1Trace", "Algo2Config", "ExactSolution", "GuardExceeded", "SimulationSummary",
    "SolveTimeout", "algorithm1", "algorithm2", "brute_force_two_stage", "exact_multistage",
    "rolling_horizon_step", "simulate_rolling_horizon", "solve_two_stage",
]
