"""Monte Carlo verification of the equilibrium.

Stopping levels are sampled by inverse transform from the analytic quantile
function (rewards depend only on ranks, and the equilibrium is specified
distributionally). Path simulation exists solely to verify the martingale
characterization of the value function.

Randomness comes from counter-based Philox streams keyed by (seed, stream)
with one 4-output counter block per ceil(draws/4) per game, so any block
partition of the games produces bit-identical results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .equilibrium import Equilibrium
from .errors import StepTooCoarse

_STREAM_LEVELS = 0
_STREAM_TIEBREAK = 1
_STREAM_OPPONENTS = 2
_STREAM_PATHS = 3

_BLOCK_GAMES = 65_536

#: Acceptance multiplier on standard errors used throughout the test suite;
#: 4 sigma keeps the per-check false-failure rate around 6e-5.
SE_MULTIPLIER = 4.0


@dataclass(frozen=True)
class SimConfig:
    """Simulation budget and determinism knobs.

    ``path_step`` of None selects the default Euler step 1e-4 (xbar/sigma)^2
    at use time; ``deviation_grid`` is the number of stopping levels probed
    by the best-response curve.
    """

    games: int
    seed: int
    path_step: float | None = None
    deviation_grid: int = 101

    def __post_init__(self):
        if self.games < 1:
            raise ValueError("games must be >= 1")
        if self.path_step is not None and not self.path_step > 0:
            raise ValueError("path_step must be positive")
        if self.deviation_grid < 2:
            raise ValueError("deviation_grid must be >= 2")


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    std_error: float
    samples: int


def _finalize(total: float, total_sq: float, count: int) -> MCEstimate:
    mean = total / count
    var = max(total_sq - total * total / count, 0.0) / max(count - 1, 1)
    return MCEstimate(mean, math.sqrt(var / count), count)


def _game_uniforms(seed: int, stream: int, start_game: int, count: int,
                   per_game: int) -> np.ndarray:
    """Uniform draws for games [start_game, start_game + count), shape
    (count, per_game); draw (g, d) depends on (seed, stream, g, d) only."""
    blocks = -(-per_game // 4)  # Philox counter blocks hold 4 outputs each
    bitgen = np.random.Philox(key=[seed, stream])
    bitgen.advance(start_game * blocks)
    draws = np.random.Generator(bitgen).random(count * blocks * 4)
    return draws.reshape(count, blocks * 4)[:, :per_game]


def sample_level_block(eq: Equilibrium, seed: int, start_game: int,
                       count: int) -> np.ndarray:
    """Stopping levels for a contiguous run of games, shape (count, n)."""
    u = _game_uniforms(seed, _STREAM_LEVELS, start_game, count, eq.n)
    return np.asarray(eq.quantile(u))


def sample_levels(eq: Equilibrium, config: SimConfig):
    """Stream of per-game level vectors (one i.i.d. draw of F per player)."""
    done = 0
    while done < config.games:
        count = min(_BLOCK_GAMES, config.games - done)
        block = sample_level_block(eq, config.seed, done, count)
        yield from block
        done += count


def rank_order(levels: np.ndarray, tiebreak: np.ndarray) -> np.ndarray:
    """Player order per game, best level first; ties fall back on the
    uniform tiebreak draws (a uniformly random order among the tied)."""
    return np.lexsort((tiebreak, levels))[..., ::-1]


@dataclass(frozen=True)
class PlayResult:
    payoff_by_player: tuple[MCEstimate, ...]
    level_by_rank: tuple[MCEstimate, ...]


def play_games(eq: Equilibrium, config: SimConfig) -> PlayResult:
    """Simulate whole contests: rank sampled levels, pay by rank.

    Returns the per-player mean payoff (each should estimate the average
    reward 1/n, by equilibrium indifference) and the mean level at each rank
    (estimating the order-statistic means).
    """
    n = eq.n
    rewards = eq.reward.as_array()
    pay_sum = np.zeros(n)
    pay_sq = np.zeros(n)
    lev_sum = np.zeros(n)
    lev_sq = np.zeros(n)
    done = 0
    while done < config.games:
        count = min(_BLOCK_GAMES, config.games - done)
        levels = sample_level_block(eq, config.seed, done, count)
        tiebreak = _game_uniforms(config.seed, _STREAM_TIEBREAK, done, count, n)
        order = rank_order(levels, tiebreak)
        ranked = np.take_along_axis(levels, order, axis=1)
        payoffs = np.empty_like(levels)
        np.put_along_axis(payoffs, order, np.broadcast_to(rewards, (count, n)), axis=1)
        pay_sum += payoffs.sum(axis=0)
        pay_sq += (payoffs**2).sum(axis=0)
        lev_sum += ranked.sum(axis=0)
        lev_sq += (ranked**2).sum(axis=0)
        done += count
    games = config.games
    return PlayResult(
        tuple(_finalize(pay_sum[i], pay_sq[i], games) for i in range(n)),
        tuple(_finalize(lev_sum[i], lev_sq[i], games) for i in range(n)),
    )


@dataclass(frozen=True)
class BestResponsePoint:
    x: float
    estimate: MCEstimate
    analytic: float


@dataclass(frozen=True)
class BestResponseCurve:
    points: tuple[BestResponsePoint, ...]

    @property
    def max_deviation(self) -> float:
        return max(abs(p.estimate.mean - p.analytic) for p in self.points)


def best_response_curve(eq: Equilibrium, config: SimConfig) -> BestResponseCurve:
    """Empirical payoff of a unilateral deviator stopping at fixed levels.

    For each grid level x in [0, xbar], plays the deviation against n-1
    simulated opponents per game and pairs the estimate with the analytic
    value u(x). In equilibrium no grid point should beat 1/n by more than
    noise.
    """
    n = eq.n
    prefix = np.concatenate(([0.0], np.cumsum(eq.reward.as_array())))
    grid = np.linspace(0.0, eq.xbar, config.deviation_grid)
    sums = np.zeros(grid.size)
    sqs = np.zeros(grid.size)
    done = 0
    while done < config.games:
        count = min(_BLOCK_GAMES, config.games - done)
        u = _game_uniforms(config.seed, _STREAM_OPPONENTS, done, count, n - 1)
        opponents = np.asarray(eq.quantile(u))
        for i, x in enumerate(grid):
            above = (opponents > x).sum(axis=1)
            tied = (opponents == x).sum(axis=1)
            payoff = (prefix[above + tied + 1] - prefix[above]) / (tied + 1)
            sums[i] += payoff.sum()
            sqs[i] += (payoff**2).sum()
        done += count
    analytic = np.asarray(eq.value(grid))
    points = tuple(
        BestResponsePoint(float(grid[i]), _finalize(sums[i], sqs[i], config.games),
                          float(analytic[i]))
        for i in range(grid.size)
    )
    return BestResponseCurve(points)


@dataclass(frozen=True)
class PathExitResult:
    """Outcome of the absorbed-diffusion check of the value function.

    ``estimate`` is the Monte Carlo mean of u at the exit level, which the
    martingale property pins at the average reward 1/n up to noise plus the
    reported Euler discretization allowance (one barrier-shift unit
    sigma sqrt(dt) / xbar; the scheme applies no boundary-crossing
    correction, so the bias is documented instead of hidden).
    """

    estimate: MCEstimate
    hit_probability: float
    hit_std_error: float
    path_step: float
    discretization_allowance: float


def default_path_step(eq: Equilibrium) -> float:
    return 1e-4 * (eq.xbar / eq.market.sigma) ** 2


def path_exit_check(eq: Equilibrium, config: SimConfig) -> PathExitResult:
    """Euler-Maruyama paths from x0, absorbed at 0, stopped on exiting
    [0, xbar]; estimates E[u(X_exit)] = P(hit xbar) * R1."""
    market = eq.market
    dt = config.path_step if config.path_step is not None else default_path_step(eq)
    if not eq.xbar / (market.sigma * math.sqrt(dt)) > 10:
        raise StepTooCoarse(
            f"path_step {dt} leaves fewer than 10 sigma-steps across the support")
    paths = config.games
    gen = np.random.Generator(np.random.Philox(key=[config.seed, _STREAM_PATHS]))
    x = np.full(paths, market.x0)
    hits = 0
    drift = market.mu * dt
    vol = market.sigma * math.sqrt(dt)
    max_steps = int(4000 * eq.xbar**2 / (market.sigma**2 * dt)) + 1000
    for _ in range(max_steps):
        x += drift + vol * gen.standard_normal(x.size)
        exited_top = x >= eq.xbar
        hits += int(exited_top.sum())
        x = x[~(exited_top | (x <= 0.0))]
        if x.size == 0:
            break
    else:
        raise RuntimeError("paths failed to exit within the step budget")
    r1 = eq.reward.r[0]
    total = hits * r1
    estimate = _finalize(total, hits * r1 * r1, paths)
    p_hat = hits / paths
    hit_se = math.sqrt(max(p_hat * (1 - p_hat), 0.0) / max(paths - 1, 1))
    allowance = market.sigma * math.sqrt(dt) / eq.xbar
    return PathExitResult(estimate, p_hat, hit_se, dt, allowance)
