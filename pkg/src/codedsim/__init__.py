"""Planner and Monte Carlo simulator for coded matrix-vector workloads.

Plans worker assignments and redundant (erasure-coded) load allocations across
multiple masters and heterogeneous workers whose communication and computation
delays are random, then verifies the plans by simulation.
"""

from .allocation import (
    AllocationResult,
    ScaConfig,
    exact_allocate_computation,
    fractional_optimal_loads,
    lambert_w_minus1,
    markov_allocate,
    opt_time_per_row,
    sca_refine,
)
from .assignment import (
    AssignmentOutcome,
    FractionalGreedyConfig,
    IteratedGreedyConfig,
    brute_force_fractional,
    compute_values,
    fractional_greedy,
    iterated_greedy,
    simple_greedy,
    uniform_assignment,
)
from .delay_model import (
    EffectiveChannel,
    comp_cdf,
    effective_channel,
    expected_completed,
    sample_total_delay,
    total_cdf,
    trans_cdf,
    unit_delay,
)
from .fitting import FitResult, fit_shifted_exponential, load_samples
from .planner import (
    ALLOCATIONS,
    POLICIES,
    build_plan,
    load_plan,
    master_channels,
    save_plan,
)
from .scenario import (
    Assignment,
    GeneratorConfig,
    LinkParams,
    Plan,
    Scenario,
    generate_scenario,
    load_scenario,
    save_scenario,
)
from .simulator import DelayStats, integer_plan, monte_carlo, quantile, simulate_once

__version__ = "0.1.0"

__all__ = [
    "ALLOCATIONS",
    "POLICIES",
    "AllocationResult",
    "Assignment",
    "AssignmentOutcome",
    "DelayStats",
    "EffectiveChannel",
    "FitResult",
    "FractionalGreedyConfig",
    "GeneratorConfig",
    "IteratedGreedyConfig",
    "LinkParams",
    "Plan",
    "ScaConfig",
    "Scenario",
    "brute_force_fractional",
    "build_plan",
    "comp_cdf",
    "compute_values",
    "effective_channel",
    "exact_allocate_computation",
    "expected_completed",
    "fit_shifted_exponential",
    "fractional_greedy",
    "fractional_optimal_loads",
    "generate_scenario",
    "integer_plan",
    "iterated_greedy",
    "lambert_w_minus1",
    "load_plan",
    "load_samples",
    "load_scenario",
    "markov_allocate",
    "master_channels",
    "monte_carlo",
    "opt_time_per_row",
    "quantile",
    "sample_total_delay",
    "save_plan",
    "save_scenario",
    "sca_refine",
    "simple_greedy",
    "simulate_once",
    "total_cdf",
    "trans_cdf",
    "uniform_assignment",
    "unit_delay",
]
