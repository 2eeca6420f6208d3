"""The unique equilibrium stopping distribution and its analytic evaluators.

Players observe i.i.d. drifted Brownian motions started at x0 and absorbed
at 0, stop privately, and are paid by the rank of their stopping level. In
the unique Nash equilibrium all players stop at levels drawn i.i.d. from an
atomless distribution F supported on [0, xbar], characterized by

    F(x) = g_inverse(u(x)),

where u is the harmonic (scale-transformed linear) value function pinned by
u(0) = Rn, u(x0) = Rbar, u(xbar) = R1, and g(y) is the expected reward for
sitting at quantile y among n-1 i.i.d. uniform opponents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import quadrature
from .errors import InvalidDistribution, OutOfRange
from .market import MarketParams, RewardScheme, normalize, validate

#: |mu| below this multiple of sigma^2/x0 is treated as zero drift to avoid
#: catastrophic cancellation in A = -2 mu / sigma^2 and B = expm1(A x0).
DRIFTLESS_FACTOR = 1e-12


class DriftRegime(Enum):
    DRIFTLESS = "driftless"
    DRIFTED = "drifted"


def is_driftless(market: MarketParams) -> bool:
    """Whether mu is numerically indistinguishable from zero drift."""
    return abs(market.mu) < DRIFTLESS_FACTOR * market.sigma**2 / market.x0


def _as_array(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def _ret(arr: np.ndarray, scalar: bool):
    return float(arr) if scalar else arr


def scale_h(market: MarketParams, x) -> float | np.ndarray:
    """Normalized scale function: h(0) = 0, h(x0) = 1, strictly increasing.

    h(x) = (exp(-2 mu x / sigma^2) - 1) / (exp(-2 mu x0 / sigma^2) - 1) for
    nonzero drift and x / x0 in the driftless limit.
    """
    arr, scalar = _as_array(x)
    if np.any(arr < 0):
        raise OutOfRange("scale function is defined on x >= 0")
    if is_driftless(market):
        return _ret(arr / market.x0, scalar)
    a = -2.0 * market.mu / market.sigma**2
    b = math.expm1(a * market.x0)
    return _ret(np.expm1(a * arr) / b, scalar)


def g_eval(reward: RewardScheme, y) -> float | np.ndarray:
    """Expected reward at quantile y against n-1 i.i.d. uniform opponents.

    g(y) = sum_k R_k C(n-1, k-1) y^(n-k) (1-y)^(k-1); strictly increasing
    from g(0) = Rn to g(1) = R1.
    """
    arr, scalar = _as_array(y)
    if np.any((arr < 0) | (arr > 1)):
        raise OutOfRange("g is defined on [0, 1]")
    n = reward.n
    out = np.zeros_like(arr)
    for k in range(1, n + 1):
        out += reward.r[k - 1] * math.comb(n - 1, k - 1) * arr ** (n - k) * (1 - arr) ** (k - 1)
    return _ret(out, scalar)


def g_derivative(reward: RewardScheme, y) -> float | np.ndarray:
    """Derivative of g, in the cancellation-free nonnegative form.

    g'(y) = (n-1) sum_k (R_k - R_{k+1}) C(n-2, k-1) y^(n-1-k) (1-y)^(k-1),
    which vanishes only where all active terms do (possibly the endpoints).
    """
    arr, scalar = _as_array(y)
    n = reward.n
    out = np.zeros_like(arr)
    for k in range(1, n):
        gap = reward.r[k - 1] - reward.r[k]
        if gap != 0.0:
            out += gap * math.comb(n - 2, k - 1) * arr ** (n - 1 - k) * (1 - arr) ** (k - 1)
    return _ret((n - 1) * out, scalar)


def g_inverse(reward: RewardScheme, v) -> float | np.ndarray:
    """Unique y in [0, 1] with g(y) = v, to absolute tolerance 1e-12 in y.

    Bisection brackets the root to width ~1e-8, then safeguarded Newton
    polishes it; any Newton step leaving the bracket (g' can vanish at the
    endpoints) falls back to bisection.
    """
    arr, scalar = _as_array(v)
    rn, r1 = reward.r[-1], reward.r[0]
    slack = 1e-12 * max(1.0, r1 - rn)
    if np.any((arr < rn - slack) | (arr > r1 + slack)):
        raise OutOfRange(f"g_inverse needs values in [{rn}, {r1}]")
    target = np.clip(arr, rn, r1)

    flat = np.atleast_1d(target).ravel()
    lo = np.zeros_like(flat)
    hi = np.ones_like(flat)
    for _ in range(27):
        mid = 0.5 * (lo + hi)
        below = np.asarray(g_eval(reward, mid)) < flat
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    y = 0.5 * (lo + hi)
    for _ in range(40):
        f = np.asarray(g_eval(reward, y)) - flat
        lo = np.where(f < 0, y, lo)
        hi = np.where(f < 0, hi, y)
        d = np.asarray(g_derivative(reward, y))
        with np.errstate(divide="ignore", invalid="ignore"):
            step = f / d
        cand = y - step
        bad = ~np.isfinite(cand) | (cand <= lo) | (cand >= hi)
        cand = np.where(bad, 0.5 * (lo + hi), cand)
        done = np.abs(cand - y) < 1e-13
        y = cand
        if np.all(done):
            break
    # exact endpoint mapping so that cdf(0) = 0 and cdf(xbar) = 1 exactly
    y = np.where(flat == rn, 0.0, np.where(flat == r1, 1.0, y))
    out = y.reshape(np.shape(target))
    return _ret(out, scalar)


@dataclass(frozen=True)
class DiscreteDistribution:
    """Atomic distribution over stopping levels; the one empirical-cdf type.

    Levels are strictly increasing, probabilities positive and summing to 1.
    """

    levels: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        levels = np.asarray(self.levels, dtype=float)
        probs = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "probs", probs)
        if levels.ndim != 1 or levels.shape != probs.shape:
            raise InvalidDistribution("levels and probs must be 1-d and congruent")
        if levels.size == 0:
            raise InvalidDistribution("distribution needs at least one atom")
        if np.any(levels < 0):
            raise InvalidDistribution("levels must be nonnegative")
        if np.any(np.diff(levels) <= 0):
            raise InvalidDistribution("levels must be strictly increasing")
        if np.any(probs <= 0):
            raise InvalidDistribution("atom probabilities must be positive")
        if abs(math.fsum(probs) - 1.0) > 1e-12:
            raise InvalidDistribution("atom probabilities must sum to 1")
        object.__setattr__(self, "_cum", np.concatenate(([0.0], np.cumsum(probs))))

    @classmethod
    def from_samples(cls, values) -> DiscreteDistribution:
        levels, counts = np.unique(np.asarray(values, dtype=float), return_counts=True)
        return cls(levels, counts / counts.sum())

    def mass_at_most(self, x) -> float | np.ndarray:
        arr, scalar = _as_array(x)
        idx = np.searchsorted(self.levels, arr, side="right")
        return _ret(self._cum[idx], scalar)

    def mass_below(self, x) -> float | np.ndarray:
        arr, scalar = _as_array(x)
        idx = np.searchsorted(self.levels, arr, side="left")
        return _ret(self._cum[idx], scalar)


@dataclass(frozen=True)
class Equilibrium:
    """Computed equilibrium for a validated (market, reward) pair.

    Stores the normalized scheme, the support endpoint xbar and the cached
    constants A = -2 mu / sigma^2 and B = expm1(A x0) (both zero in the
    driftless regime, where the limiting linear forms apply).
    """

    market: MarketParams
    reward: RewardScheme
    xbar: float
    A: float
    B: float
    regime: DriftRegime

    @property
    def n(self) -> int:
        return self.market.n

    def value(self, x) -> float | np.ndarray:
        """Equilibrium expected payoff u(x) for stopping at level x in [0, xbar]."""
        arr, scalar = _as_array(x)
        slack = 1e-9 * self.xbar
        if np.any((arr < -slack) | (arr > self.xbar + slack)):
            raise OutOfRange(f"u is defined on [0, {self.xbar}]")
        arr = np.clip(arr, 0.0, self.xbar)
        if self.regime is DriftRegime.DRIFTLESS:
            u = arr / (self.n * self.market.x0)
        else:
            u = np.expm1(self.A * arr) / (self.n * self.B)
        return _ret(u, scalar)

    def cdf(self, x) -> float | np.ndarray:
        """Equilibrium cdf, 0 below the support and 1 above it."""
        arr, scalar = _as_array(x)
        inner = np.clip(arr, 0.0, self.xbar)
        y = np.asarray(g_inverse(self.reward, np.asarray(self.value(inner))))
        out = np.where(arr <= 0, 0.0, np.where(arr >= self.xbar, 1.0, y))
        return _ret(out, scalar)

    def quantile(self, y) -> float | np.ndarray:
        """Inverse cdf: quantile(y) = u_inverse(g(y)), in closed form."""
        arr, scalar = _as_array(y)
        if np.any((arr < 0) | (arr > 1)):
            raise OutOfRange("quantile needs y in [0, 1]")
        gv = np.asarray(g_eval(self.reward, arr))
        if self.regime is DriftRegime.DRIFTLESS:
            q = self.n * self.market.x0 * gv
        else:
            q = np.log1p(self.n * self.B * gv) / self.A
        return _ret(q, scalar)

    def pdf(self, x) -> float | np.ndarray:
        """Equilibrium density u'(x) / g'(F(x)); one-sided limits (possibly
        +inf) at the support endpoints, 0 outside. Do not integrate this
        directly; integrate in quantile space instead."""
        arr, scalar = _as_array(x)
        inside = (arr >= 0) & (arr <= self.xbar)
        clipped = np.clip(arr, 0.0, self.xbar)
        if self.regime is DriftRegime.DRIFTLESS:
            du = np.full_like(clipped, 1.0 / (self.n * self.market.x0))
        else:
            du = self.A * np.exp(self.A * clipped) / (self.n * self.B)
        dg = np.asarray(g_derivative(self.reward, np.asarray(self.cdf(clipped))))
        dens = np.where(dg > 0, du / np.where(dg > 0, dg, 1.0), np.inf)
        dens = np.where(inside, dens, 0.0)
        return _ret(dens, scalar)

    def feasibility_defect(self) -> float:
        """|integral of h over the equilibrium law minus 1|, by quadrature.

        Zero in exact arithmetic (the feasibility identity characterizing
        laws of the stopped diffusion); the computed defect measures the
        numerical health of the whole evaluator chain.
        """
        h_of_q = lambda y: np.asarray(scale_h(self.market, np.asarray(self.quantile(y))))
        return abs(quadrature.integrate_unit(h_of_q) - 1.0)


def build(market: MarketParams, reward: RewardScheme) -> Equilibrium:
    """Construct the equilibrium for a validated (market, reward) pair.

    The scheme is normalized first (the equilibrium distribution is
    invariant under shifting and scaling the rewards). Raises DriftTooLarge
    when mu >= mu_bar for this scheme.
    """
    scheme = reward if reward.is_normalized else normalize(reward)
    validate(market, scheme)
    n, x0 = market.n, market.x0
    r1 = scheme.r[0]
    if is_driftless(market):
        return Equilibrium(market, scheme, xbar=n * x0 * r1, A=0.0, B=0.0,
                           regime=DriftRegime.DRIFTLESS)
    a = -2.0 * market.mu / market.sigma**2
    b = math.expm1(a * x0)
    xbar = math.log1p(n * r1 * b) / a
    return Equilibrium(market, scheme, xbar=xbar, A=a, B=b, regime=DriftRegime.DRIFTED)


def payoff_against(reward: RewardScheme, others: DiscreteDistribution, x: float) -> float:
    """Exact expected payoff for stopping at x while the n-1 opponents stop
    i.i.d. from ``others``.

    Sums the multinomial configurations of opponents strictly above, strictly
    below, and exactly at x; a tie among k+1 players at ranks i+1..i+k+1 pays
    their average reward.
    """
    if x < 0:
        raise OutOfRange("stopping level must be nonnegative")
    n = reward.n
    at_most = float(others.mass_at_most(x))
    below = float(others.mass_below(x))
    above = 1.0 - at_most
    atom = at_most - below
    total = 0.0
    m = n - 1
    for i in range(m + 1):  # opponents above x
        for k in range(m - i + 1):  # opponents tied at x
            j = m - i - k
            coef = math.comb(m, i) * math.comb(m - i, k)
            prob = coef * above**i * below**j * atom**k
            if prob == 0.0:
                continue
            shared = math.fsum(reward.r[i:i + k + 1]) / (k + 1)
            total += prob * shared
    return total
