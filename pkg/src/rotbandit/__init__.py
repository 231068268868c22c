"""Simulation library for rotting (non-increasing reward) multi-armed bandits."""

from .core import (
    BernoulliBatch, Constant, FunctionArm, Gaussian, HorizonError, MeanSurface, Observation, Policy,
    RestedStep, RestedTable, RestlessStep, RestlessTable, SettingError, SurfaceKind, make_rng,
    validate_mean_surface,
)
from .environments import (
    Environment, PiecewiseSpec, dataset_env_from_table, make_piecewise_lb_instance, make_prop1_pair,
    make_rested_two_arm, set_upsilon, variation_budget,
)
from .evaluation import (
    exhaustive_optimal, favorable_event_check, greedy_oracle_value, regret_trajectory, simulate,
    theoretical_bound, total_reward,
)
from .policies import (
    FEWA, UCB1, EffFEWA, EffRawUCB, Exp3S, GreedyOracle, RawUCB, RoundRobin, confidence_radius,
    delta_t, make_policy, policy_constant, raw_ucb_index,
)
from .windowstats import ArmStats, EffArmStats, eff_update, eff_windows, grid

__version__ = "0.1.0"
