"""Market parameters, reward schemes, and the Lorenz-order comparator."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DegenerateReward, DimensionMismatch, DriftTooLarge, NonMonotoneReward

#: Absolute tolerance on prefix sums and normalization identities. Analytic
#: identities downstream rely on the normalized scheme summing to 1 exactly,
#: so arithmetic on schemes should re-normalize afterwards.
PREFIX_TOL = 1e-12


@dataclass(frozen=True)
class MarketParams:
    """Common diffusion parameters: start level, drift, volatility, player count."""

    x0: float
    mu: float
    sigma: float
    n: int

    def __post_init__(self):
        if not self.x0 > 0:
            raise ValueError(f"x0 must be positive, got {self.x0}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"n must be an integer >= 2, got {self.n}")


class LorenzRelation(Enum):
    """Outcome of comparing two equal-total reward schemes by prefix sums."""

    LESS_EQUAL = "less_equal"
    GREATER_EQUAL = "greater_equal"
    EQUAL = "equal"
    INCOMPARABLE = "incomparable"


@dataclass(frozen=True)
class RewardScheme:
    """Rank-ordered prize vector, index 0 paying the first rank.

    Prizes must be nonnegative and nonincreasing, with the top rank paying
    strictly more than the bottom one (otherwise every stopping profile is
    an equilibrium and the game is degenerate).
    """

    r: tuple[float, ...]

    def __init__(self, r):
        values = tuple(float(v) for v in r)
        if len(values) < 2:
            raise ValueError("a reward scheme needs at least two ranks")
        if any(v < 0 for v in values):
            raise NonMonotoneReward(f"rewards must be nonnegative: {values}")
        if any(a < b for a, b in zip(values, values[1:])):
            raise NonMonotoneReward(f"rewards must be nonincreasing by rank: {values}")
        if values[0] == values[-1]:
            raise DegenerateReward("top and bottom ranks pay the same reward")
        object.__setattr__(self, "r", values)

    @property
    def n(self) -> int:
        return len(self.r)

    @property
    def total(self) -> float:
        return math.fsum(self.r)

    @property
    def average(self) -> float:
        return self.total / self.n

    @property
    def is_normalized(self) -> bool:
        return self.r[-1] == 0.0 and abs(self.total - 1.0) <= PREFIX_TOL

    def as_array(self) -> np.ndarray:
        return np.array(self.r, dtype=float)

    @classmethod
    def winner_takes_all(cls, n: int) -> RewardScheme:
        return cls((1.0,) + (0.0,) * (n - 1))

    @classmethod
    def uniform(cls, n: int) -> RewardScheme:
        """Equal rewards to ranks 1..n-1, nothing to the last rank."""
        return cls((1.0 / (n - 1),) * (n - 1) + (0.0,))


def normalize(reward: RewardScheme) -> RewardScheme:
    """Shift the bottom rank to zero and rescale the total to one.

    Subtracting a constant and rescaling leave the equilibrium distribution
    unchanged, so this is the canonical representative. Idempotent.
    """
    r = reward.as_array()
    shifted = r - r[-1]
    scale = math.fsum(shifted)
    out = shifted / scale
    out[-1] = 0.0
    return RewardScheme(out)


def mu_bar(market: MarketParams, reward: RewardScheme) -> float:
    """Drift threshold below which the equilibrium support stays bounded.

    Equals (sigma^2 / 2 x0) * log((R1 - Rn) / (R1 - Rbar)); always positive,
    and smallest (most restrictive) for the winner-takes-all scheme, where it
    reads (sigma^2 / 2 x0) * log(n / (n-1)).
    """
    r1, rn, rbar = reward.r[0], reward.r[-1], reward.average
    return (market.sigma**2 / (2.0 * market.x0)) * math.log((r1 - rn) / (r1 - rbar))


def validate(market: MarketParams, reward: RewardScheme) -> None:
    """Check the standing drift assumption mu < mu_bar for this scheme."""
    if market.n != reward.n:
        raise DimensionMismatch(f"market has n={market.n}, reward has n={reward.n}")
    bound = mu_bar(market, reward)
    if not market.mu < bound:
        raise DriftTooLarge(f"mu={market.mu} >= mu_bar={bound:.6g}; support would diverge")


def lorenz_compare(a: RewardScheme, b: RewardScheme) -> LorenzRelation:
    """Compare two equal-total schemes by inequality in the Lorenz order.

    LESS_EQUAL means every prefix sum of ``a`` is at most that of ``b``,
    i.e. ``a`` spreads the reward more equally. Prefix sums within
    ``PREFIX_TOL`` count as ties so that floating-point copies compare EQUAL.
    """
    if a.n != b.n:
        raise DimensionMismatch(f"schemes have different lengths {a.n} and {b.n}")
    if abs(a.total - b.total) > PREFIX_TOL:
        raise ValueError("Lorenz order is only defined for equal total rewards")
    pa = np.cumsum(a.as_array())
    pb = np.cumsum(b.as_array())
    diff = pa - pb
    le = bool(np.all(diff <= PREFIX_TOL))
    ge = bool(np.all(diff >= -PREFIX_TOL))
    if le and ge:
        return LorenzRelation.EQUAL
    if le:
        return LorenzRelation.LESS_EQUAL
    if ge:
        return LorenzRelation.GREATER_EQUAL
    return LorenzRelation.INCOMPARABLE


def random_scheme(n: int, rng: np.random.Generator) -> RewardScheme:
    """Draw a random normalized scheme (sorted uniforms, bottom pinned to 0)."""
    while True:
        draws = np.sort(rng.random(n))[::-1]
        if draws[0] > draws[-1]:
            return normalize(RewardScheme(draws))
