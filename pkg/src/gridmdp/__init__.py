"""Markov decision process models of price-responsive smart loads."""

from .analysis import (
    AnalysisReport,
    SimulationResult,
    analyze,
    demand_curve,
    induced_chain,
    joint_stationary,
    long_run_averages,
    simulate_trajectory,
)
from .config import ConfigError, ExperimentConfig, dump_config, load_config, parse_config
from .devices import (
    DeviceSpec,
    FactoredKernel,
    baseline_policy,
    build_control_load,
    build_deferrable_load,
    build_device,
    build_optional_load,
    build_storage_load,
    compose,
    default_spec,
)
from .exceptions import ConvergenceError, GridMDPError, ValidationError
from .mdp import (
    MdpModel,
    PolicyIteration,
    ValueIteration,
    bellman_backup,
    bellman_residual,
    expected_reward,
    policy_evaluation,
    policy_iteration,
    value_iteration,
)
from .price import (
    PriceChain,
    build_birth_death_chain,
    equidistant_levels,
    expected_price,
    stationary_distribution,
)

__version__ = "0.1.0"
