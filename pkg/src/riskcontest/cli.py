"""Command-line front end emitting CSV artifacts.

Commands: equilibrium, metrics, optimize, sweep, simulate. Every CSV is
self-describing: one header row, metadata as ``# key=value`` comment lines,
floats at 12 significant digits, LF line endings. Exit codes: 0 success,
2 validation failure, 3 infeasible design, 4 strict-simulation failure.
"""

from __future__ import annotations

import argparse
import sys
from typing import IO

import numpy as np

from . import design, metrics, simulate
from .equilibrium import build
from .errors import ContestError, NoFeasibleScheme
from .market import MarketParams, RewardScheme, mu_bar, normalize


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


class _Writer:
    """Accumulates rows and metadata, writes LF-terminated CSV."""

    def __init__(self):
        self.lines: list[str] = []

    def header(self, *cols):
        self.lines.append(",".join(cols))

    def row(self, *cells):
        self.lines.append(",".join(_fmt(c) for c in cells))

    def meta(self, key, value):
        self.lines.append(f"# {key}={_fmt(value)}")

    def dump(self, out: IO[str]):
        out.write("\n".join(self.lines) + "\n")


def parse_reward(text: str, n: int) -> RewardScheme:
    """Parse a scheme tag: wta | uniform | cutoff:j | comma-separated list."""
    tag = text.strip().lower()
    if tag == "wta":
        return RewardScheme.winner_takes_all(n)
    if tag == "uniform":
        return RewardScheme.uniform(n)
    if tag.startswith("cutoff:"):
        return design.cutoff_scheme(n, int(tag.split(":", 1)[1]))
    values = [float(v) for v in text.split(",")]
    if len(values) != n:
        raise ValueError(f"explicit reward list has {len(values)} entries, expected n={n}")
    scheme = RewardScheme(values)
    normalized = normalize(scheme)
    if any(abs(a - b) > 1e-12 for a, b in zip(scheme.r, normalized.r)):
        print(f"warning: reward list normalized to {normalized.r}", file=sys.stderr)
    return normalized


def _parse_utilities(specs: list[str]):
    out = []
    for spec in specs:
        name, _, arg = spec.partition(":")
        name = name.strip().lower()
        if name == "linear":
            out.append((spec, metrics.linear_utility()))
        elif name == "power":
            out.append((spec, metrics.power_utility(float(arg))))
        elif name == "exp":
            out.append((spec, metrics.exponential_utility(float(arg))))
        else:
            raise ValueError(f"unknown utility family {name!r} (use linear|power:g|exp:g)")
    return out


def _load_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as handle:
        for raw in handle:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"config line is not 'key = value': {raw.rstrip()}")
            key, _, val = line.partition("=")
            values[key.strip().replace("-", "_")] = val.strip()
    return values


_LIST_KEYS = {"reward", "k", "utility"}
_BOOL_KEYS = {"skip_infeasible", "strict"}


def _merge_config(args: argparse.Namespace, parser: argparse.ArgumentParser) -> argparse.Namespace:
    """Overlay config-file values under explicit flags (flags win)."""
    if not getattr(args, "config", None):
        return args
    from_file = _load_config_file(args.config)
    for key, text in from_file.items():
        if not hasattr(args, key):
            parser.error(f"unknown config key {key!r}")
        if key in _BOOL_KEYS:
            if not getattr(args, key):
                setattr(args, key, text.lower() in ("1", "true", "yes", "on"))
        elif getattr(args, key) is None:
            if key in _LIST_KEYS:
                setattr(args, key, [p.strip() for p in text.split(";") if p.strip()])
            else:
                setattr(args, key, text)
    return args


def _market(args, mu=None) -> MarketParams:
    required = ("n", "sigma", "x0") if mu is not None else ("n", "mu", "sigma", "x0")
    for name in required:
        if getattr(args, name) is None:
            raise ValueError(f"missing required market parameter --{name}")
    drift = float(args.mu) if mu is None else float(mu)
    return MarketParams(x0=float(args.x0), mu=drift,
                        sigma=float(args.sigma), n=int(args.n))


def _single_reward(args, n: int) -> RewardScheme:
    if not args.reward:
        raise ValueError("missing required --reward")
    if len(args.reward) != 1:
        raise ValueError("this command takes exactly one --reward")
    return parse_reward(args.reward[0], n)


def _default(value, fallback):
    return fallback if value is None else value


def _emit(writer: _Writer, args) -> None:
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as handle:
            writer.dump(handle)
    else:
        writer.dump(sys.stdout)


def cmd_equilibrium(args) -> int:
    market = _market(args)
    eq = build(market, _single_reward(args, market.n))
    writer = _Writer()
    writer.header("y", "quantile", "x", "cdf", "u")
    ys = np.linspace(0.0, 1.0, 1001)
    qs = np.asarray(eq.quantile(ys))
    xs = ys * eq.xbar
    cdfs = np.asarray(eq.cdf(xs))
    us = np.asarray(eq.value(xs))
    for i in range(ys.size):
        writer.row(float(ys[i]), float(qs[i]), float(xs[i]), float(cdfs[i]), float(us[i]))
    writer.meta("xbar", eq.xbar)
    writer.meta("mubar", mu_bar(market, eq.reward))
    writer.meta("A", eq.A)
    writer.meta("B", eq.B)
    _emit(writer, args)
    return 0


def cmd_metrics(args) -> int:
    market = _market(args)
    eq = build(market, _single_reward(args, market.n))
    writer = _Writer()
    writer.header("metric", "k", "value")
    writer.row("expected_performance", None, metrics.expected_performance(eq))
    writer.row("expected_duration", None, metrics.expected_duration(eq))
    for k in _requested_ranks(args):
        writer.row("order_stat_mean", k, metrics.order_stat_mean(eq, k))
    for label, phi in _parse_utilities(args.utility or []):
        writer.row(f"expected_utility[{label}]", None, metrics.expected_utility(eq, phi))
    _emit(writer, args)
    return 0


def _requested_ranks(args) -> list[int]:
    out = []
    for chunk in args.k or []:
        out.extend(int(v) for v in str(chunk).split(",") if v.strip())
    return out


def cmd_optimize(args) -> int:
    market = _market(args)
    objective = args.objective
    if objective == "average":
        result = design.optimize_average(market)
    elif objective == "first-rank":
        if args.seed is None:
            raise ValueError("--seed is required for the first-rank verification sweep")
        result = design.optimize_first_rank(market, seed=int(args.seed))
    elif objective == "rank-k":
        ranks = _requested_ranks(args)
        if len(ranks) != 1:
            raise ValueError("objective rank-k needs exactly one --k")
        result = design.optimize_rank_k(market, ranks[0])
    else:
        raise ValueError(f"unknown objective {objective!r}")
    writer = _Writer()
    writer.header("rank", "reward")
    for rank, value in enumerate(result.scheme.r, start=1):
        writer.row(rank, value)
    writer.meta("objective", result.objective_value)
    writer.meta("regime", result.regime.value)
    for key in ("k_star", "iterations", "all_equivalent", "sweep_margin"):
        if key in result.diagnostics:
            writer.meta(key, result.diagnostics[key])
    if "enumeration" in result.diagnostics:
        if result.diagnostics.get("skipped"):
            writer.meta("infeasible_cutoffs",
                        ";".join(str(j) for j in result.diagnostics["skipped"]))
        writer.header("j", "objective_j")
        for j, value in result.diagnostics["enumeration"]:
            writer.row(j, value)
    _emit(writer, args)
    return 0


def cmd_sweep(args) -> int:
    mode = args.mode or "mu"
    writer = _Writer()
    if mode == "mu":
        if args.mu_min is None or args.mu_max is None:
            raise ValueError("mu sweep needs --mu-min and --mu-max")
        if not args.reward:
            raise ValueError("mu sweep needs at least one --reward")
        probe = _market(args, mu=0.0)
        schemes = [(tag, parse_reward(tag, probe.n)) for tag in args.reward]
        grid = np.linspace(float(args.mu_min), float(args.mu_max),
                           int(_default(args.mu_steps, 61)))
        writer.header("mu", "scheme_id", "expected_performance")
        for tag, scheme in schemes:
            for mu in grid:
                market = _market(args, mu=mu)
                if not market.mu < mu_bar(market, scheme):
                    if args.skip_infeasible:
                        print(f"warning: skipping mu={mu:.6g} for {tag} (>= mu_bar)",
                              file=sys.stderr)
                        continue
                    raise DriftTooLarge(
                        f"grid point mu={mu:.6g} exceeds mu_bar for scheme {tag}; "
                        "pass --skip-infeasible to drop such points")
                writer.row(float(mu), tag, metrics.expected_performance(build(market, scheme)))
    elif mode == "kstar_panel":
        market = _market(args, mu=args.mu if args.mu is not None else 0.0)
        ranks = _requested_ranks(args)
        if len(ranks) != 1:
            raise ValueError("kstar_panel needs exactly one --k")
        k = ranks[0]
        writer.header("j", "objective")
        for j in range(1, market.n):
            scheme = design.cutoff_scheme(market.n, j)
            if not market.mu < mu_bar(market, scheme):
                print(f"warning: skipping infeasible cutoff j={j}", file=sys.stderr)
                continue
            writer.row(j, metrics.order_stat_mean(build(market, scheme), k))
    elif mode == "kstar_ratio":
        alpha = float(_default(args.alpha, 0.5))
        n_max = int(_default(args.n_max, 30))
        writer.header("n", "kstar_over_n")
        for n in range(2, n_max + 1):
            k = round(alpha * n)
            if not 1 <= k <= n - 1:
                continue
            writer.row(n, design.k_star(n, k) / n)
    else:
        raise ValueError(f"unknown sweep mode {mode!r}")
    _emit(writer, args)
    return 0


def cmd_simulate(args) -> int:
    market = _market(args)
    eq = build(market, _single_reward(args, market.n))
    if args.seed is None:
        raise ValueError("--seed is required for simulation")
    seed = int(args.seed)
    games = int(_default(args.games, 100_000))
    paths = int(_default(args.paths, 100_000))
    config = simulate.SimConfig(
        games=games, seed=seed,
        path_step=float(args.path_step) if args.path_step is not None else None,
        deviation_grid=int(_default(args.deviation_grid, 101)))
    writer = _Writer()
    writer.header("quantity", "k_or_x", "estimate", "std_error", "analytic", "z_score")

    def z_for(estimate: simulate.MCEstimate, analytic: float, slack: float = 0.0) -> float:
        gap = max(abs(estimate.mean - analytic) - slack, 0.0)
        if gap == 0.0 or estimate.std_error == 0.0:
            return 0.0
        sign = 1.0 if estimate.mean >= analytic else -1.0
        return sign * gap / estimate.std_error

    zs: list[float] = []
    played = simulate.play_games(eq, config)
    rbar = eq.reward.average
    for player, est in enumerate(played.payoff_by_player, start=1):
        z = z_for(est, rbar)
        zs.append(z)
        writer.row("player_payoff", player, est.mean, est.std_error, rbar, z)
    analytic_levels = [metrics.order_stat_mean(eq, k) for k in range(1, market.n)]
    analytic_levels.append(metrics.order_stat_mean_residual(eq))
    for rank, est in enumerate(played.level_by_rank, start=1):
        z = z_for(est, analytic_levels[rank - 1])
        zs.append(z)
        writer.row("rank_level", rank, est.mean, est.std_error, analytic_levels[rank - 1], z)
    curve = simulate.best_response_curve(eq, config)
    for point in curve.points:
        z = z_for(point.estimate, point.analytic)
        zs.append(z)
        writer.row("best_response", point.x, point.estimate.mean,
                   point.estimate.std_error, point.analytic, z)
    path_config = simulate.SimConfig(games=paths, seed=seed,
                                     path_step=config.path_step,
                                     deviation_grid=config.deviation_grid)
    exit_check = simulate.path_exit_check(eq, path_config)
    # the path row's z is taken after subtracting the documented Euler bias
    # allowance, so --strict stays meaningful at large path counts
    z = z_for(exit_check.estimate, rbar, slack=exit_check.discretization_allowance * eq.reward.r[0])
    zs.append(z)
    writer.row("path_exit_u", None, exit_check.estimate.mean,
               exit_check.estimate.std_error, rbar, z)
    writer.meta("seed", seed)
    writer.meta("games", games)
    writer.meta("paths", paths)
    writer.meta("path_step", exit_check.path_step)
    writer.meta("path_discretization_allowance", exit_check.discretization_allowance)
    _emit(writer, args)
    if args.strict and any(abs(z) > simulate.SE_MULTIPLIER for z in zs):
        print("strict mode: at least one |z_score| > 4", file=sys.stderr)
        return 4
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riskcontest",
        description="Equilibrium, metrics, reward design, and Monte Carlo "
                    "verification for rank-based risk-taking contests.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--n", type=int, help="number of players")
        p.add_argument("--mu", type=float, help="drift per unit time")
        p.add_argument("--sigma", type=float, help="volatility")
        p.add_argument("--x0", type=float, help="initial level")
        p.add_argument("--reward", action="append",
                       help="scheme tag: wta | uniform | cutoff:j | comma list")
        p.add_argument("--k", action="append", help="target rank(s), comma separated")
        p.add_argument("--seed", type=int, help="RNG seed (required when randomness is used)")
        p.add_argument("--out", help="output CSV path (default stdout)")
        p.add_argument("--config", help="key = value config file; flags override")
        p.add_argument("--skip-infeasible", action="store_true",
                       help="skip sweep points violating the drift bound")
        p.add_argument("--strict", action="store_true",
                       help="exit 4 when any simulation |z_score| > 4")

    p_eq = sub.add_parser("equilibrium", help="tabulate quantile, cdf and value function")
    common(p_eq)
    p_eq.set_defaults(handler=cmd_equilibrium)

    p_met = sub.add_parser("metrics", help="evaluate principal objectives")
    common(p_met)
    p_met.add_argument("--utility", action="append",
                       help="utility family: linear | power:gamma | exp:gamma")
    p_met.set_defaults(handler=cmd_metrics)

    p_opt = sub.add_parser("optimize", help="solve a reward-design problem")
    common(p_opt)
    p_opt.add_argument("--objective", choices=["average", "first-rank", "rank-k"],
                       required=True)
    p_opt.set_defaults(handler=cmd_optimize)

    p_sweep = sub.add_parser("sweep", help="grid sweeps for figure reproduction")
    common(p_sweep)
    p_sweep.add_argument("--mode", choices=["mu", "kstar_panel", "kstar_ratio"])
    p_sweep.add_argument("--mu-min", type=float)
    p_sweep.add_argument("--mu-max", type=float)
    p_sweep.add_argument("--mu-steps", type=int)
    p_sweep.add_argument("--alpha", type=float)
    p_sweep.add_argument("--n-max", type=int)
    p_sweep.set_defaults(handler=cmd_sweep)

    p_sim = sub.add_parser("simulate", help="Monte Carlo consistency report")
    common(p_sim)
    p_sim.add_argument("--games", type=int)
    p_sim.add_argument("--paths", type=int)
    p_sim.add_argument("--path-step", type=float)
    p_sim.add_argument("--deviation-grid", type=int)
    p_sim.set_defaults(handler=cmd_simulate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _merge_config(args, parser)
        return args.handler(args)
    except NoFeasibleScheme as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except (ContestError, ValueError, OSError) as exc:
        name = type(exc).__name__ if isinstance(exc, ContestError) else "error"
        print(f"{name}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
