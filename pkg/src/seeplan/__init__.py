"""Joint transmit/jamming power planning for secrecy energy efficiency.

A tabular MDP toolkit for an energy-harvesting wireless link where a
full-duplex destination jams a passive eavesdropper: physical-layer model,
state/action spaces with a sparse transition kernel, finite-horizon and
discounted planners plus a greedy baseline, exact and Monte Carlo policy
evaluation, and an experiment CLI.
"""

from .cli import (
    ALGORITHMS,
    ConfigError,
    ExperimentConfig,
    ResultRow,
    TimingReport,
    compare_timing,
    config_from_mapping,
    default_params,
    load_config,
    run_experiment,
    write_results,
)
from .mdp import (
    Action,
    RewardTable,
    State,
    StateSpace,
    TransitionKernel,
    build_kernel,
    build_reward_table,
    enumerate_states,
    feasible_actions,
    successor_distribution,
    transition_prob,
)
from .model import (
    InfeasibleActionError,
    LinkGains,
    ParameterError,
    SystemParams,
    battery_next,
    immediate_reward,
    power_to_units,
    secrecy_rate,
    sinr_pair,
)
from .planners import (
    NonstationaryPolicy,
    PlanStats,
    PolicyCoverageError,
    StationaryPolicy,
    greedy_action,
    greedy_policy,
    horizon_to_discount,
    load_policy,
    plan_backward_induction,
    plan_policy_iteration,
    save_policy,
)
from .sim import (
    EpisodeTrace,
    Metrics,
    SlotRecord,
    episode_seeds,
    exact_evaluate,
    exact_evaluate_geometric,
    monte_carlo_evaluate,
    run_episode,
)

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS",
    "Action",
    "ConfigError",
    "EpisodeTrace",
    "ExperimentConfig",
    "InfeasibleActionError",
    "LinkGains",
    "Metrics",
    "NonstationaryPolicy",
    "ParameterError",
    "PlanStats",
    "PolicyCoverageError",
    "ResultRow",
    "RewardTable",
    "SlotRecord",
    "State",
    "StateSpace",
    "StationaryPolicy",
    "SystemParams",
    "TimingReport",
    "TransitionKernel",
    "battery_next",
    "build_kernel",
    "build_reward_table",
    "compare_timing",
    "config_from_mapping",
    "default_params",
    "enumerate_states",
    "episode_seeds",
    "exact_evaluate",
    "exact_evaluate_geometric",
    "feasible_actions",
    "greedy_action",
    "greedy_policy",
    "horizon_to_discount",
    "immediate_reward",
    "load_config",
    "load_policy",
    "monte_carlo_evaluate",
    "plan_backward_induction",
    "plan_policy_iteration",
    "power_to_units",
    "run_episode",
    "run_experiment",
    "save_policy",
    "secrecy_rate",
    "sinr_pair",
    "successor_distribution",
    "transition_prob",
    "write_results",
]
