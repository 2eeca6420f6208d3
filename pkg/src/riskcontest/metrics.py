"""Principal objectives and comparative statics on equilibria.

All expectations are integrals over quantile space y in [0, 1] (the
quantile function is smooth there even where the density blows up at the
support endpoints).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Callable

import numpy as np

from . import quadrature
from .equilibrium import DriftRegime, Equilibrium, g_eval
from .errors import DimensionMismatch, IdenticalSchemes, OutOfRange

CROSSING_GRID = 2000
CROSSING_REFINE_TOL = 1e-8
DOMINANCE_TOL = 1e-9


def expected_performance(eq: Equilibrium) -> float:
    """Mean stopping level E[X] = integral of the quantile function.

    Equals x0 exactly when mu = 0; below x0 for negative drift, above for
    positive.
    """
    return quadrature.integrate_unit(lambda y: np.asarray(eq.quantile(y)))


def expected_duration(eq: Equilibrium) -> float:
    """Mean total play time E[tau].

    Optional sampling gives E[X] = x0 + mu E[tau] for nonzero drift; in the
    driftless case the second-moment identity E[X^2] - x0^2 = sigma^2 E[tau]
    applies (the drifted formula is a 0/0 form there).
    """
    mkt = eq.market
    if eq.regime is DriftRegime.DRIFTLESS:
        second = quadrature.integrate_unit(lambda y: np.asarray(eq.quantile(y)) ** 2)
        return (second - mkt.x0**2) / mkt.sigma**2
    return (expected_performance(eq) - mkt.x0) / mkt.mu


def expected_utility(eq: Equilibrium, phi: Callable[[np.ndarray], np.ndarray]) -> float:
    """E[phi(X)] for a vectorized utility function defined on [0, xbar]."""
    return quadrature.integrate_unit(lambda y: np.asarray(phi(np.asarray(eq.quantile(y)))))


def linear_utility() -> Callable[[np.ndarray], np.ndarray]:
    return lambda x: x


def power_utility(gamma: float) -> Callable[[np.ndarray], np.ndarray]:
    """x ** gamma; concave for gamma < 1, convex for gamma > 1."""
    if gamma <= 0:
        raise ValueError("power utility needs gamma > 0")
    return lambda x: np.asarray(x) ** gamma


def exponential_utility(gamma: float) -> Callable[[np.ndarray], np.ndarray]:
    """-exp(-gamma x) / gamma, the CARA family; concave for gamma > 0."""
    if gamma <= 0:
        raise ValueError("exponential utility needs gamma > 0")
    return lambda x: -np.exp(-gamma * np.asarray(x)) / gamma


def phi_coeff(n: int, k: int, l: int) -> Fraction:
    """Exact combinatorial weight (2n-k-l)! (k+l-2)! / ((n-l)! (l-1)!).

    Computed in big-integer arithmetic; for fixed k it increases in l up to
    l = k and decreases after. Convert to float only after taking ratios.
    """
    if not (1 <= k <= n and 1 <= l <= n):
        raise OutOfRange(f"phi_coeff needs 1 <= k, l <= n, got k={k}, l={l}, n={n}")
    return Fraction(
        math.factorial(2 * n - k - l) * math.factorial(k + l - 2),
        math.factorial(n - l) * math.factorial(l - 1),
    )


def _check_rank(eq: Equilibrium, k: int) -> None:
    if not (1 <= k <= eq.n - 1):
        raise OutOfRange(
            f"rank k must be in [1, {eq.n - 1}]; the mean of the last rank is only "
            "available as the residual n E[X] - sum of the others"
        )


def order_stat_mean(eq: Equilibrium, k: int) -> float:
    """Mean level of the k-th best player, E[Y^(k)], for 1 <= k <= n-1.

    Driftless: the closed form
        n x0 (n! / (2n-1)!) C(n-1, k-1) sum_l R_l phi_coeff(n, k, l),
    with the rational coefficient of each R_l reduced exactly before
    conversion to float. Nonzero drift: quadrature of
        n C(n-1, k-1) A^-1 log(n B g(y) + 1) y^(n-k) (1-y)^(k-1).
    """
    _check_rank(eq, k)
    n, x0 = eq.n, eq.market.x0
    binom = math.comb(n - 1, k - 1)
    if eq.regime is DriftRegime.DRIFTLESS:
        base = Fraction(math.factorial(n) * binom, math.factorial(2 * n - 1))
        acc = 0.0
        for l in range(1, n + 1):
            acc += eq.reward.r[l - 1] * float(base * phi_coeff(n, k, l))
        return n * x0 * acc
    a, b = eq.A, eq.B

    def integrand(y):
        gv = np.asarray(g_eval(eq.reward, y))
        return np.log1p(n * b * gv) / a * y ** (n - k) * (1 - y) ** (k - 1)

    return n * binom * quadrature.integrate_unit(integrand)


def order_stat_mean_residual(eq: Equilibrium) -> float:
    """Mean level of the last rank via n E[X] - sum_{k<n} E[Y^(k)].

    The closed form for E[Y^(k)] covers only k <= n-1; this residual is the
    complement under the linearity identity sum_k E[Y^(k)] = n E[X].
    """
    total = eq.n * expected_performance(eq)
    return total - math.fsum(order_stat_mean(eq, k) for k in range(1, eq.n))


class CrossDirection(Enum):
    UP = "up"
    DOWN = "down"


@dataclass(frozen=True)
class CrossingReport:
    """Sign changes of cdf_b - cdf_a over the joint support.

    ``is_strict_single_crossing`` holds when there is exactly one up-crossing
    and no down-crossing, i.e. the second cdf starts below and ends above.
    """

    crossings: tuple[tuple[float, CrossDirection], ...]

    @property
    def is_strict_single_crossing(self) -> bool:
        ups = sum(1 for _, d in self.crossings if d is CrossDirection.UP)
        downs = len(self.crossings) - ups
        return ups == 1 and downs == 0


def _same_market(eq_a: Equilibrium, eq_b: Equilibrium) -> None:
    ma, mb = eq_a.market, eq_b.market
    if (ma.n, ma.x0, ma.mu, ma.sigma) != (mb.n, mb.x0, mb.mu, mb.sigma):
        raise DimensionMismatch("equilibria must share the same market parameters")


def single_crossing(eq_a: Equilibrium, eq_b: Equilibrium) -> CrossingReport:
    """Locate all sign changes of cdf_b(x) - cdf_a(x).

    Scans a uniform grid of width max(xbar_a, xbar_b) / 2000 and refines each
    detected change by bisection to 1e-8. The grid is a detector, not an
    assumption: extra crossings, if present, are reported. When b's scheme
    has less inequality than a's, theory predicts exactly one up-crossing.
    """
    _same_market(eq_a, eq_b)
    if max(abs(p - q) for p, q in zip(eq_a.reward.r, eq_b.reward.r)) < 1e-12:
        raise IdenticalSchemes("single crossing needs two distinct reward schemes")
    hi = max(eq_a.xbar, eq_b.xbar)
    xs = np.linspace(0.0, hi, CROSSING_GRID + 1)[1:-1]
    delta = np.asarray(eq_b.cdf(xs)) - np.asarray(eq_a.cdf(xs))
    nz = np.flatnonzero(delta != 0.0)
    crossings: list[tuple[float, CrossDirection]] = []
    fn = lambda x: float(eq_b.cdf(x)) - float(eq_a.cdf(x))
    for left, right in zip(nz[:-1], nz[1:]):
        if delta[left] * delta[right] >= 0:
            continue
        lo, up = xs[left], xs[right]
        flo = delta[left]
        while up - lo > CROSSING_REFINE_TOL:
            mid = 0.5 * (lo + up)
            fmid = fn(mid)
            if fmid == 0.0 or (fmid < 0) == (flo < 0):
                lo, flo = mid, fmid
            else:
                up = mid
        direction = CrossDirection.UP if delta[right] > 0 else CrossDirection.DOWN
        crossings.append((0.5 * (lo + up), direction))
    return CrossingReport(tuple(crossings))


def second_order_dominance(eq_a: Equilibrium, eq_b: Equilibrium) -> bool:
    """Whether eq_b dominates eq_a in second stochastic order.

    True iff the running integral of cdf_b - cdf_a stays <= 1e-9 on the
    refinement grid (equivalently, every increasing concave utility prefers
    eq_b).
    """
    _same_market(eq_a, eq_b)
    hi = max(eq_a.xbar, eq_b.xbar)
    xs = np.linspace(0.0, hi, CROSSING_GRID + 1)
    delta = np.asarray(eq_b.cdf(xs)) - np.asarray(eq_a.cdf(xs))
    step = xs[1] - xs[0]
    running = np.cumsum((delta[:-1] + delta[1:]) * 0.5 * step)
    return bool(np.all(running <= DOMINANCE_TOL))
