"""The principal's reward-design problems.

Normalized schemes form a simplex whose extreme points are the cut-off
schemes (equal pay to the first j ranks). The k-th-rank objective is linear
in the scheme for zero drift, convex for positive drift (so an extreme
point, i.e. a cut-off, is optimal) and strictly concave for negative drift
(so the optimum is unique but may sit inside a face).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any

import numpy as np

from . import quadrature
from .equilibrium import build, g_eval, is_driftless
from .errors import DriftTooLarge, NoFeasibleScheme, OutOfRange
from .market import MarketParams, RewardScheme, mu_bar, random_scheme
from .metrics import expected_performance, order_stat_mean, phi_coeff

ASCENT_GRAD_TOL = 1e-9
ASCENT_MAX_ITER = 10_000
ARMIJO_C = 1e-4
ENUM_TIE_TOL = 1e-10


class Regime(Enum):
    CLOSED_FORM_ZERO_DRIFT = "closed_form_zero_drift"
    ENUMERATION_POSITIVE_DRIFT = "enumeration_positive_drift"
    CONCAVE_ASCENT_NEGATIVE_DRIFT = "concave_ascent_negative_drift"
    CLOSED_FORM_AVERAGE = "closed_form_average"


@dataclass(frozen=True)
class DesignResult:
    scheme: RewardScheme
    objective_value: float
    regime: Regime
    diagnostics: dict[str, Any] = field(default_factory=dict)


def cutoff_scheme(n: int, j: int) -> RewardScheme:
    """The cut-off at j: reward 1/j to ranks 1..j, nothing below."""
    if not (1 <= j <= n - 1):
        raise OutOfRange(f"cut-off rank must be in [1, {n - 1}], got {j}")
    return RewardScheme((1.0 / j,) * j + (0.0,) * (n - j))


def blend_cutoffs(n: int, weights: np.ndarray) -> RewardScheme:
    """Scheme sum_j weights[j-1] * cutoff(j); weights on the unit simplex."""
    weights = np.asarray(weights, dtype=float)
    _check_simplex(n, weights)
    r = np.zeros(n)
    for j in range(1, n):
        w = weights[j - 1]
        if w != 0.0:
            r[:j] += w / j
    return RewardScheme(r)


def cutoff_weights(scheme: RewardScheme) -> np.ndarray:
    """Unique simplex weights expressing a normalized scheme over cut-offs."""
    r = scheme.as_array()
    gaps = r[:-1] - r[1:]
    return gaps * np.arange(1, scheme.n)


def _check_simplex(n: int, weights: np.ndarray) -> None:
    if weights.shape != (n - 1,):
        raise OutOfRange(f"need {n - 1} cut-off weights, got shape {weights.shape}")
    if np.any(weights < 0) or abs(math.fsum(weights) - 1.0) > 1e-12:
        raise OutOfRange("cut-off weights must be nonnegative and sum to 1")


def k_star(n: int, k: int) -> int:
    """Largest j in [k, n-1] whose weight phi(k, j) still reaches the running
    average of phi(k, 1..j-1); the optimal driftless cut-off rank.

    Evaluated in exact rational arithmetic.
    """
    if not (1 <= k <= n - 1):
        raise OutOfRange(f"k must be in [1, {n - 1}], got {k}")
    best = None
    prefix = Fraction(0)
    for j in range(1, n):
        if j >= k and (j == 1 or phi_coeff(n, k, j) >= prefix / (j - 1)):
            best = j
        prefix += phi_coeff(n, k, j)
    assert best is not None  # j = k always qualifies: phi(k, k) is the maximum
    return best


def _cutoff_g_matrix(n: int, y: np.ndarray) -> np.ndarray:
    """Rows g^j(y) for the cut-off schemes j = 1..n-1."""
    return np.stack([np.asarray(g_eval(cutoff_scheme(n, j), y)) for j in range(1, n)])


def _j_constants(market: MarketParams) -> tuple[float, float]:
    if is_driftless(market):
        raise DriftTooLarge("the blended objective J is defined for nonzero drift only")
    a = -2.0 * market.mu / market.sigma**2
    return a, math.expm1(a * market.x0)


def objective_J(market: MarketParams, k: int, weights: np.ndarray) -> float:
    """Blended k-th-rank objective over cut-off weights (nonzero drift).

    J = A^-1 * integral of log(n B sum_j w_j g^j(y) + 1) y^(n-k) (1-y)^(k-1);
    E[Y^(k)] of the blended scheme equals n C(n-1, k-1) J. Strictly concave
    in the weights for mu < 0, strictly convex for mu > 0.
    """
    weights = np.asarray(weights, dtype=float)
    _check_simplex(market.n, weights)
    a, b = _j_constants(market)
    n = market.n
    if market.mu > 0 and market.mu >= mu_bar(market, blend_cutoffs(n, weights)):
        raise DriftTooLarge("blended scheme violates the drift bound")

    def integrand(y):
        mix = n * b * (weights @ _cutoff_g_matrix(n, y))
        return np.log1p(mix) / a * y ** (n - k) * (1 - y) ** (k - 1)

    return quadrature.integrate_unit(integrand)


def grad_J(market: MarketParams, k: int, weights: np.ndarray) -> np.ndarray:
    """Gradient of objective_J: components A^-1 * integral of
    n B g^j / (n B sum w g + 1) * y^(n-k) (1-y)^(k-1)."""
    weights = np.asarray(weights, dtype=float)
    _check_simplex(market.n, weights)
    a, b = _j_constants(market)
    n = market.n
    x, w = quadrature.unit_nodes(quadrature.MAX_NODES)
    gm = _cutoff_g_matrix(n, x)
    mix = n * b * (weights @ gm) + 1.0
    factor = (n * b / a) * x ** (n - k) * (1 - x) ** (k - 1) / mix
    return (gm * factor) @ w


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the unit simplex (sort-based)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    rho = np.flatnonzero(u + (1.0 - css) / np.arange(1, v.size + 1) > 0)[-1]
    shift = (1.0 - css[rho]) / (rho + 1)
    return np.maximum(v + shift, 0.0)


def _ascend_reduced(market: MarketParams, k: int, support: np.ndarray,
                    start: np.ndarray) -> tuple[np.ndarray, int, float]:
    """Projected gradient ascent of J over weights supported on ``support``.

    Armijo backtracking with halving and step-size memory; convergence is a
    gradient-mapping norm (reference step 1) below ASCENT_GRAD_TOL.
    """
    n = market.n
    lam = np.asarray(start, dtype=float)
    step = 1.0

    def embed(w):
        full = np.zeros(n - 1)
        full[support] = w
        return full

    value = objective_J(market, k, embed(lam))
    for iteration in range(ASCENT_MAX_ITER):
        grad = grad_J(market, k, embed(lam))[support]
        mapping = project_simplex(lam + grad) - lam
        norm = float(np.linalg.norm(mapping))
        if norm < ASCENT_GRAD_TOL:
            return lam, iteration, norm
        step = min(step * 2.0, 1e12)
        while True:
            cand = project_simplex(lam + step * grad)
            cand_value = objective_J(market, k, embed(cand))
            if cand_value >= value + ARMIJO_C * float(grad @ (cand - lam)):
                break
            step *= 0.5
            if step < 1e-18:
                cand, cand_value = lam, value
                break
        lam, value = cand, cand_value
    raise RuntimeError(
        f"projected gradient ascent did not reach tolerance {ASCENT_GRAD_TOL} "
        f"in {ASCENT_MAX_ITER} iterations"
    )


def optimize_rank_k(market: MarketParams, k: int,
                    initial: np.ndarray | None = None,
                    full_simplex: bool = False) -> DesignResult:
    """Maximize the mean level of the k-th best player over normalized schemes.

    Zero drift: the cut-off at k_star, in closed form. Positive drift: the
    objective is convex over the simplex, so the best feasible cut-off wins
    (infeasible cut-offs, where mu >= mu_bar, are skipped and reported).
    Negative drift: projected gradient ascent of the strictly concave J over
    the face spanned by cut-offs k_star..n-1; ``full_simplex=True`` ascends
    over all cut-offs instead (diagnostic check of the face restriction),
    and ``initial`` overrides the barycenter start on the chosen face.
    """
    n = market.n
    if not (1 <= k <= n - 1):
        raise OutOfRange(f"k must be in [1, {n - 1}], got {k}")
    ks = k_star(n, k)

    if is_driftless(market):
        scheme = cutoff_scheme(n, ks)
        value = order_stat_mean(build(market, scheme), k)
        return DesignResult(scheme, value, Regime.CLOSED_FORM_ZERO_DRIFT,
                            {"k_star": ks})

    if market.mu > 0:
        table: list[tuple[int, float]] = []
        skipped: list[int] = []
        for j in range(1, n):
            scheme = cutoff_scheme(n, j)
            if market.mu < mu_bar(market, scheme):
                table.append((j, order_stat_mean(build(market, scheme), k)))
            else:
                skipped.append(j)
        if not table:
            raise NoFeasibleScheme("every cut-off violates the drift bound")
        best_value = max(v for _, v in table)
        best_j = min(j for j, v in table if v >= best_value - ENUM_TIE_TOL)
        if not skipped:
            # with the full simplex available, theory caps the optimum at k_star
            assert best_j <= ks, "enumeration exceeded k_star, contradicting theory"
        scheme = cutoff_scheme(n, best_j)
        return DesignResult(scheme, dict(table)[best_j],
                            Regime.ENUMERATION_POSITIVE_DRIFT,
                            {"k_star": ks, "enumeration": table, "skipped": skipped,
                             "below_target_rank": best_j < k})

    support = np.arange(0 if full_simplex else ks - 1, n - 1)
    start = np.full(support.size, 1.0 / support.size) if initial is None \
        else np.asarray(initial, dtype=float)
    lam, iterations, grad_norm = _ascend_reduced(market, k, support, start)
    full = np.zeros(n - 1)
    full[support] = lam
    scheme = blend_cutoffs(n, project_simplex(full))
    value = order_stat_mean(build(market, scheme), k)
    return DesignResult(scheme, value, Regime.CONCAVE_ASCENT_NEGATIVE_DRIFT,
                        {"k_star": ks, "iterations": iterations,
                         "gradient_norm": grad_norm, "weights": full})


def optimize_average(market: MarketParams) -> DesignResult:
    """Maximize mean performance: winner-takes-all under positive drift,
    uniform under negative drift, and any scheme (uniform by convention)
    under zero drift where the objective is constant at x0."""
    n = market.n
    if market.mu > 0:
        scheme = RewardScheme.winner_takes_all(n)
        eq = build(market, scheme)  # raises DriftTooLarge past the stringent bound
        return DesignResult(scheme, expected_performance(eq),
                            Regime.CLOSED_FORM_AVERAGE, {})
    scheme = RewardScheme.uniform(n)
    eq = build(market, scheme)
    diagnostics = {}
    if eq.A == 0.0:
        diagnostics["all_equivalent"] = True
        diagnostics["note"] = f"objective constant = x0 = {market.x0} over all schemes"
    return DesignResult(scheme, expected_performance(eq),
                        Regime.CLOSED_FORM_AVERAGE, diagnostics)


def optimize_first_rank(market: MarketParams, sweep_size: int = 50,
                        seed: int = 0) -> DesignResult:
    """Maximize the best player's mean level: winner-takes-all, always.

    The diagnostics carry a verification sweep comparing E[Y^(1)] against
    ``sweep_size`` random schemes (all of which winner-takes-all dominates
    in the Lorenz order); ``sweep_margin`` is the smallest gap observed.
    """
    n = market.n
    scheme = RewardScheme.winner_takes_all(n)
    eq = build(market, scheme)
    best = order_stat_mean(eq, 1)
    rng = np.random.default_rng(seed)
    margins = []
    for _ in range(sweep_size):
        other = random_scheme(n, rng)
        if max(abs(a - b) for a, b in zip(other.r, scheme.r)) < 1e-9:
            continue
        margins.append(best - order_stat_mean(build(market, other), 1))
    diagnostics = {"sweep_size": len(margins),
                   "sweep_margin": min(margins) if margins else math.inf,
                   "sweep_all_below": all(m > 0 for m in margins)}
    return DesignResult(scheme, best, Regime.CLOSED_FORM_AVERAGE, diagnostics)
