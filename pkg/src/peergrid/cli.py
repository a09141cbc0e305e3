"""Command-line entry point.

Exit codes: 0 ok, 2 invalid arguments or input, 3 assumption violation,
4 symmetry precondition, 5 enumeration cap, 6 config error. User indices in
output are 1-based.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time

import numpy as np

from . import __version__
from .analysis import boomerang_gradient
from .equilibrium import evaluate, nash_fixed_point
from .errors import InvalidNetwork, PeerGridError, UndefinedMetric
from .experiments import load_config, resolve_workers, run_study, write_manifest
from .fileio import write_csv
from .model import build_topology, load_instance, save_network
from . import pricing
from .selection import exact_selection, heuristic_selection, performance_metric

log = logging.getLogger("peergrid")


def _fmt(x) -> str:
    return f"{x:.12g}"


def _vec(v) -> str:
    return " ".join(_fmt(x) for x in np.atleast_1d(v))


def _indices(assignment) -> str:
    return ",".join(str(i + 1) for i in assignment.indices) or "(none)"


def _spec(args) -> pricing.DistributionSpec:
    return pricing.DistributionSpec(args.a_low, args.a_high, args.b_low, args.b_high)


def _scalar_cost(instance) -> float:
    c = instance.cost.scalar()
    if c is None:
        raise InvalidNetwork("this scheme needs a common cost slope c")
    return c


def _load(args):
    instance = load_instance(args.network, args.users)
    if getattr(args, "gamma", None) is not None:
        instance = instance.with_gamma(args.gamma)
    return instance


# -- subcommands ------------------------------------------------------------------------

def cmd_topology(args) -> int:
    t0 = time.perf_counter()
    network = build_topology(args.kind, args.n)
    if args.out is None:
        for row in network.weights:
            print(",".join(_fmt(v) for v in row))
        return 0
    save_network(network, args.out)
    write_manifest(args.out, "topology", {"kind": args.kind, "n": str(args.n)}, "", time.perf_counter() - t0)
    print(f"wrote {args.kind} network with {args.n} users to {args.out}")
    return 0


def _prices(args, n):
    if args.prices is not None:
        p = np.loadtxt(args.prices, delimiter=",", dtype=float, ndmin=1).ravel()
        if p.shape != (n,):
            raise InvalidNetwork(f"{args.prices}: expected {n} prices, got {p.size}")
        return p
    return np.full(n, float(args.price))


def cmd_solve(args) -> int:
    t0 = time.perf_counter()
    instance = _load(args)
    p = _prices(args, instance.n)
    out = evaluate(instance, p)
    x_fp = nash_fixed_point(instance, p)
    residual = float(np.abs(out.consumption - x_fp).max())
    print("user,price,consumption,utility")
    for i in range(instance.n):
        print(f"{i + 1},{_fmt(p[i])},{_fmt(out.consumption[i])},{_fmt(out.user_utilities[i])}")
    print(f"profit = {_fmt(out.profit)}")
    print(f"welfare = {_fmt(out.welfare)}")
    print(f"fixed_point_residual = {residual:.3e}")
    if args.csv:
        rows = [
            {"user": i + 1, "price": p[i], "consumption": out.consumption[i], "utility": out.user_utilities[i]}
            for i in range(instance.n)
        ]
        write_csv(args.csv, ("user", "price", "consumption", "utility"), rows)
        write_manifest(args.csv, "solve", {"network": args.network, "users": args.users}, "", time.perf_counter() - t0)
    return 0


def cmd_price(args) -> int:
    instance = _load(args)
    scheme = args.scheme
    if scheme == "ppd":
        terms = pricing.ppd_price_terms(instance)
        p = pricing.ppd_prices(instance)
        x = pricing.ppd_consumption(instance)
        print(f"prices = {_vec(p)}")
        print(f"  constant a/2 = {_vec(terms.constant)}")
        print(f"  cost term = {_vec(terms.cost)}")
        print(f"  influence discount = {_vec(terms.influence_incentive)}")
        print(f"  influenced surcharge = {_vec(terms.influenced_surcharge)}")
        print(f"consumption = {_vec(x)}")
        print(f"profit = {_fmt(evaluate(instance, p, x).profit)}")
    elif scheme == "uniform":
        p = pricing.uniform_price_complete(instance)
        out = evaluate(instance, p)
        print(f"price = {_fmt(p)}")
        print(f"mean_field_price = {_fmt(pricing.uniform_price_mean_field(instance))}")
        print(f"consumption = {_vec(out.consumption)}")
        print(f"profit = {_fmt(out.profit)}")
    elif scheme == "incomplete":
        spec, c = _spec(args), _scalar_cost(instance)
        p_lb = pricing.incomplete_price_lower_bound(spec, instance.network, instance.gamma, c)
        x_lb = pricing.incomplete_consumption_lower_bound(spec, instance.network, instance.gamma, p_lb)
        out = evaluate(instance, p_lb)
        print(f"price_lower_bound = {_fmt(p_lb)}")
        print(f"expected_consumption_lower_bound = {_fmt(x_lb)}")
        print(f"consumption = {_vec(out.consumption)}")
        print(f"profit = {_fmt(out.profit)}")
    elif scheme == "baseline":
        spec, c = _spec(args), _scalar_cost(instance)
        p = pricing.baseline_price_no_peer(spec, c)
        print(f"price = {_fmt(p)}")
        print(f"expected_consumption = {_fmt(pricing.baseline_expected_consumption(spec, c))}")
        print(f"expected_profit = {_fmt(pricing.expected_profit_no_peer(spec, p, c, instance.n))}")
    else:
        x = pricing.social_optimum(instance)
        p_sub, x_sub = pricing.subsidized_equilibrium(instance)
        print(f"social_optimum = {_vec(x)}")
        print(f"subsidies = {_vec(pricing.pigouvian_subsidies(instance, x))}")
        print(f"subsidized_prices = {_vec(p_sub)}")
        print(f"subsidized_consumption = {_vec(x_sub)}")
    return 0


def cmd_select(args) -> int:
    instance = _load(args)
    spec = _spec(args)
    ex = args.expected_x
    if ex is None:
        ex = pricing.baseline_expected_consumption(spec, _scalar_cost(instance))
    exact = heur = None
    if args.method in ("exact", "both"):
        exact = exact_selection(instance, args.price, args.m, cap=args.cap)
        print(f"exact: users = {_indices(exact.assignment)}, profit = {_fmt(exact.profit)}")
    if args.method in ("heuristic", "both"):
        heur = heuristic_selection(instance, args.price, args.m, ex)
        print(f"heuristic: users = {_indices(heur.assignment)}, profit = {_fmt(heur.profit)}")
    base = (exact or heur).baseline_profit
    print(f"baseline_profit = {_fmt(base)}")
    if exact and heur:
        try:
            print(f"S_m = {_fmt(performance_metric(heur.profit, exact.profit, base))}")
        except UndefinedMetric:
            print("S_m = n/a")
    return 0


def cmd_experiment(args) -> int:
    config = load_config(args.config, args.study)
    workers = resolve_workers(args.threads)
    rows, out = run_study(config, workers, args.out)
    print(f"wrote {len(rows)} rows to {out}")
    return 0


def cmd_boomerang(args) -> int:
    instance = _load(args)
    report = boomerang_gradient(instance, _prices(args, instance.n))
    print(f"gradient = {_vec(report.gradient)}")
    print(f"increasing_users = {','.join(str(i + 1) for i in report.increasing_users) or '(none)'}")
    return 0


# -- parser --------------------------------------------------------------------------------

def _instance_args(p, gamma=True):
    p.add_argument("--network", required=True, help="headerless n-by-n weights CSV")
    p.add_argument("--users", required=True, help="CSV with header a,b,gamma,c")
    if gamma:
        p.add_argument("--gamma", type=float, help="override every user's gamma")


def _dist_args(p):
    d = pricing.PAPER_DISTRIBUTION
    p.add_argument("--a-low", type=float, default=d.a_low)
    p.add_argument("--a-high", type=float, default=d.a_high)
    p.add_argument("--b-low", type=float, default=d.b_low)
    p.add_argument("--b-high", type=float, default=d.b_high)


def _price_args(p):
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--price", type=float, help="common price for every user")
    g.add_argument("--prices", help="file with one price per user")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="peergrid", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"peergrid {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("topology", help="write a canonical network as CSV")
    p.add_argument("--kind", required=True, choices=["fully_connected", "star", "ring"])
    p.add_argument("--n", required=True, type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_topology)

    p = sub.add_parser("solve", help="consumption equilibrium at given prices")
    _instance_args(p)
    _price_args(p)
    p.add_argument("--csv", help="also write the per-user table here")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("price", help="prices under one of the pricing schemes")
    _instance_args(p)
    _dist_args(p)
    p.add_argument("--scheme", required=True, choices=["ppd", "uniform", "incomplete", "baseline", "social"])
    p.set_defaults(func=cmd_price)

    p = sub.add_parser("select", help="choose m users to treat")
    _instance_args(p)
    _dist_args(p)
    p.add_argument("--price", required=True, type=float)
    p.add_argument("--m", required=True, type=int)
    p.add_argument("--method", choices=["exact", "heuristic", "both"], default="both")
    p.add_argument("--expected-x", type=float, help="population mean consumption for the heuristic")
    p.add_argument("--cap", type=int, default=10**7, help="largest number of candidate subsets allowed")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("boomerang", help="consumption gradient in gamma at gamma = 0")
    _instance_args(p, gamma=False)
    _price_args(p)
    p.set_defaults(func=cmd_boomerang)

    p = sub.add_parser("experiment", help="run a Monte Carlo study from a config file")
    p.add_argument("--study", required=True, choices=["pricing", "selection", "mismatch"])
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="override output_path from the config")
    p.add_argument("--threads", type=int, help="worker processes (default: $PEERGRID_THREADS or 1)")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except PeerGridError as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
