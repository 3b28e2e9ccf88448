"""NB-IoT uplink simulator with heuristic and Q-learning resource
configuration controllers and a reproducible experiment harness."""

from .core import (
    F_PREA_SET,
    GroupConfig,
    InvalidActionError,
    InvalidObservationError,
    N_RACH_SET,
    N_REPE_SET,
    SimParams,
    TrainingDiverged,
    TtiConfig,
    TtiObservation,
    data_resource_budget,
    multi_group_params,
    rach_resource_cost,
    single_group_params,
)
from .env import EpisodeConfig, Policy, UplinkEnv, reward_multi, reward_single, run_episode
from .traffic import BetaProfile, bursty_rate, periodic_rate

__all__ = [
    "BetaProfile",
    "EpisodeConfig",
    "F_PREA_SET",
    "GroupConfig",
    "InvalidActionError",
    "InvalidObservationError",
    "N_RACH_SET",
    "N_REPE_SET",
    "Policy",
    "SimParams",
    "TrainingDiverged",
    "TtiConfig",
    "TtiObservation",
    "UplinkEnv",
    "bursty_rate",
    "data_resource_budget",
    "multi_group_params",
    "periodic_rate",
    "rach_resource_cost",
    "reward_multi",
    "reward_single",
    "run_episode",
    "single_group_params",
]
