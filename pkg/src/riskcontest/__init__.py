"""Equilibrium stopping distributions and reward design for rank-based
risk-taking contests.

Players privately observe drifted Brownian motions absorbed at zero, choose
when to stop, and are paid by the rank of their stopping level. This package
computes the unique Nash equilibrium distribution for any rank-ordered
reward scheme, evaluates principal objectives on it, solves the reward
design problem in every drift regime, and verifies the analytics by Monte
Carlo.
"""

from .design import (
    DesignResult,
    Regime,
    cutoff_scheme,
    k_star,
    optimize_average,
    optimize_first_rank,
    optimize_rank_k,
)
from .equilibrium import DiscreteDistribution, Equilibrium, build, payoff_against
from .errors import (
    ContestError,
    DegenerateReward,
    DimensionMismatch,
    DriftTooLarge,
    IdenticalSchemes,
    InvalidDistribution,
    NoFeasibleScheme,
    NonMonotoneReward,
    OutOfRange,
    StepTooCoarse,
)
from .market import (
    LorenzRelation,
    MarketParams,
    RewardScheme,
    lorenz_compare,
    mu_bar,
    normalize,
    validate,
)
from .metrics import (
    CrossingReport,
    expected_duration,
    expected_performance,
    expected_utility,
    order_stat_mean,
    single_crossing,
)
from .simulate import MCEstimate, SimConfig, best_response_curve, path_exit_check, play_games

__all__ = [
    "ContestError", "CrossingReport", "DegenerateReward", "DesignResult",
    "DimensionMismatch", "DiscreteDistribution", "DriftTooLarge", "Equilibrium",
    "IdenticalSchemes", "InvalidDistribution", "LorenzRelation", "MCEstimate",
    "MarketParams", "NoFeasibleScheme", "NonMonotoneReward", "OutOfRange",
    "Regime", "RewardScheme", "SimConfig", "StepTooCoarse",
    "best_response_curve", "build", "cutoff_scheme", "expected_duration",
    "expected_performance", "expected_utility", "k_star", "lorenz_compare",
    "mu_bar", "normalize", "optimize_average", "optimize_first_rank",
    "optimize_rank_k", "order_stat_mean", "path_exit_check", "payoff_against",
    "play_games", "single_crossing", "validate",
]

__version__ = "0.1.0"
