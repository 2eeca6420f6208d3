from __future__ import annotations

import itertools

import numpy as np
import pytest

from riskcontest.equilibrium import DiscreteDistribution, Equilibrium
from riskcontest.market import RewardScheme


def lorenz_chain_n5() -> list[RewardScheme]:
    """Five schemes on n=5 in strictly decreasing inequality.

    Cut-offs are Lorenz-ordered (prefix sums min(i, j)/j shrink in j) and a
    strict blend of adjacent cut-offs sits strictly between them.
    """
    return [
        RewardScheme((1.0, 0.0, 0.0, 0.0, 0.0)),          # winner takes all
        RewardScheme((0.75, 0.25, 0.0, 0.0, 0.0)),        # blend of cutoffs 1, 2
        RewardScheme((0.5, 0.5, 0.0, 0.0, 0.0)),          # cutoff 2
        RewardScheme((1 / 3, 1 / 3, 1 / 3, 0.0, 0.0)),    # cutoff 3
        RewardScheme((0.25, 0.25, 0.25, 0.25, 0.0)),      # cutoff 4 (uniform)
    ]


def discretize_on_quantiles(eq: Equilibrium, m: int) -> DiscreteDistribution:
    """Atoms of mass 1/m at the quantile midpoints (i + 1/2)/m."""
    levels = np.asarray(eq.quantile((np.arange(m) + 0.5) / m))
    return DiscreteDistribution(levels, np.full(m, 1.0 / m))


def brute_force_payoff(reward: RewardScheme, others: DiscreteDistribution,
                       x: float) -> float:
    """Independent payoff oracle: enumerate every opponent configuration.

    Walks the full product of opponent atoms, ranks x among each realized
    tuple and averages the tied ranks' rewards, weighting by the product of
    atom probabilities.
    """
    n = reward.n
    total = 0.0
    for combo in itertools.product(range(others.levels.size), repeat=n - 1):
        prob = float(np.prod([others.probs[i] for i in combo]))
        levels = [others.levels[i] for i in combo]
        above = sum(1 for v in levels if v > x)
        tied = sum(1 for v in levels if v == x)
        payoff = sum(reward.r[above:above + tied + 1]) / (tied + 1)
        total += prob * payoff
    return total


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260809)
