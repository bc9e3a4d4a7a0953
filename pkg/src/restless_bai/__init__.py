"""Fixed-confidence best-arm identification for restless Markov bandits."""

from .config import ExperimentConfig, load_config, load_instance, parse_config
from .delay_mdp import DelayState, StateSpaceSR, enumerate_state_space, transition_kernel
from .errors import ParseError, RestlessBAIError, ValidationError
from .instance import ArmAssignment, ProblemInstance, alt_set, best_arm, enumerate_configurations
from .markov import TransitionMatrix, kl_divergence, stationary_distribution, validate_tpm
from .occupancy import solve_configuration, solve_T_R_star
from .policy import PolicyConfig, build_policy_tables, run_nonstopping, run_rdcr_bai, stopping_threshold
from .simplex import solve_lp

__version__ = "0.1.0"

__all__ = [
    "ArmAssignment",
    "DelayState",
    "ExperimentConfig",
    "ParseError",
    "PolicyConfig",
    "ProblemInstance",
    "RestlessBAIError",
    "StateSpaceSR",
    "TransitionMatrix",
    "ValidationError",
    "alt_set",
    "best_arm",
    "build_policy_tables",
    "enumerate_configurations",
    "enumerate_state_space",
    "kl_divergence",
    "load_config",
    "load_instance",
    "parse_config",
    "run_nonstopping",
    "run_rdcr_bai",
    "solve_T_R_star",
    "solve_configuration",
    "solve_lp",
    "stationary_distribution",
    "stopping_threshold",
    "transition_kernel",
    "validate_tpm",
]
