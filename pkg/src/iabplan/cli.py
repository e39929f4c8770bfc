"""Operator command line.

Exit codes: 0 success/feasible, 1 infeasible result, 2 usage error,
3 I/O error. All randomness flows from explicit --seed flags, so every
subcommand is deterministic given its arguments.
"""

from __future__ import annotations

import argparse
import sys

from . import environment, planners, reports, resilience
from .netgraph import coverage_fraction
from .scenario import (
    LAYOUTS,
    ScenarioError,
    build_grid_scenario,
    load_scenario,
    save_scenario,
)

EXIT_OK = 0
EXIT_INFEASIBLE = 1
EXIT_USAGE = 2
EXIT_IO = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="iabplan",
        description="Plan and evaluate resilient mmWave IAB deployments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scenario", help="generate a scenario file")
    p.add_argument("layout", choices=LAYOUTS)
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--area", type=float, nargs=2, default=(1000.0, 1000.0),
                   metavar=("W", "H"))
    p.add_argument("--spacing", type=float, default=50.0)
    p.add_argument("--theta-cov", type=float, default=0.98)
    p.add_argument("--resilience-degree", type=int, default=2)
    p.add_argument("--backup-fraction", type=float, default=0.2)
    p.add_argument("--overhead", type=float, default=1.2)
    p.add_argument("--degree-cap", type=int, default=8)
    p.add_argument("--demand", type=float, default=100.0)
    p.add_argument("--fiber", type=float, default=10_000.0)

    p = sub.add_parser("plan", help="run a planner and write a deployment file")
    p.add_argument("scenario")
    p.add_argument("algorithm", choices=("greedy", "exact", "random"))
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--seed", type=int, default=0, help="random planner seed")
    p.add_argument("--max-candidates", type=int, default=15,
                   help="exact planner size guard")

    p = sub.add_parser("check", help="validate a deployment against all constraints")
    p.add_argument("scenario")
    p.add_argument("deployment")

    p = sub.add_parser("resilience", help="failure-injection trials")
    p.add_argument("scenario")
    p.add_argument("deployment")
    p.add_argument("--fractions", type=float, nargs="+", default=(0.1, 0.2, 0.3))
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the summary table as CSV")
    p.add_argument("--per-trial-out", help="write per-trial retentions as CSV")
    p.add_argument("--plot", help="render the retention curve to this PNG")

    p = sub.add_parser("serve-env", help="run the environment service")
    p.add_argument("scenario")
    p.add_argument("--transport", choices=("stdio", "tcp"), default="stdio")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=5555)
    p.add_argument("--coverage-weight", type=float, default=4.0)
    p.add_argument("--deploy-weight", type=float, default=0.2)
    p.add_argument("--vulnerability-weight", type=float, default=0.5)

    p = sub.add_parser("heatmap", help="export per-cell best received power")
    p.add_argument("scenario")
    p.add_argument("deployment")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--plot", help="render the heatmap to this PNG")

    return parser


def _cmd_scenario(args) -> int:
    scenario = build_grid_scenario(
        args.layout,
        tuple(args.area),
        args.spacing,
        coverage_target=args.theta_cov,
        resilience_degree=args.resilience_degree,
        backup_fraction=args.backup_fraction,
        overhead_factor=args.overhead,
        backhaul_degree_cap=args.degree_cap,
        demand_mbps=args.demand,
        donor_fiber_mbps=args.fiber,
    )
    save_scenario(scenario, args.out)
    print(
        f"wrote {args.out}: {len(scenario.donors)} donors, "
        f"{len(scenario.candidates)} candidates, "
        f"{len(scenario.coverage_cells)} coverage cells"
    )
    return EXIT_OK


def _cmd_plan(args) -> int:
    scenario = load_scenario(args.scenario)
    if args.algorithm == "greedy":
        result = planners.greedy_plan(scenario)
    elif args.algorithm == "random":
        result = planners.random_plan(scenario, args.seed)
    else:
        result = planners.exact_plan(scenario, max_candidates=args.max_candidates)
        if result is None:
            print("no feasible deployment exists for this scenario", file=sys.stderr)
            return EXIT_INFEASIBLE
    planners.save_deployment(scenario, result, args.out)
    print(
        f"{args.algorithm}: {result.node_count} nodes, "
        f"coverage {result.coverage_fraction:.4f}"
        + ("" if result.complete else " (incomplete: target unreachable)")
    )
    return EXIT_OK if result.complete else EXIT_INFEASIBLE


def _cmd_check(args) -> int:
    scenario = load_scenario(args.scenario)
    result = planners.load_deployment(scenario, args.deployment)
    from .constraints import check_all

    report = check_all(scenario, result.state)
    print(report.to_text())
    return EXIT_OK if report.overall_feasible else EXIT_INFEASIBLE


def _cmd_resilience(args) -> int:
    scenario = load_scenario(args.scenario)
    result = planners.load_deployment(scenario, args.deployment)
    stats = resilience.run_trials(
        scenario,
        result.state,
        fractions=tuple(args.fractions),
        n_trials=args.trials,
        master_seed=args.seed,
    )
    print(reports.trials_table(stats))
    if args.out:
        reports.write_trials_csv(stats, args.out)
    if args.per_trial_out:
        reports.write_per_trial_csv(stats, args.per_trial_out)
    if args.plot:
        reports.render_retention_png(stats, args.plot)
    return EXIT_OK


def _cmd_serve_env(args) -> int:
    scenario = load_scenario(args.scenario)
    weights = environment.RewardWeights(
        coverage=args.coverage_weight,
        deploy=args.deploy_weight,
        vulnerability=args.vulnerability_weight,
    )
    if args.transport == "stdio":
        environment.serve_stdio(scenario, weights)
    else:
        environment.serve_tcp(scenario, args.host, args.port, weights)
    return EXIT_OK


def _cmd_heatmap(args) -> int:
    scenario = load_scenario(args.scenario)
    result = planners.load_deployment(scenario, args.deployment)
    grid = reports.heatmap_grid(scenario, result.state)
    reports.write_heatmap_csv(grid, args.out)
    if args.plot:
        reports.render_heatmap_png(grid, scenario, result.state, args.plot)
    print(f"wrote {grid.shape[0]}x{grid.shape[1]} heatmap to {args.out}")
    return EXIT_OK


_COMMANDS = {
    "scenario": _cmd_scenario,
    "plan": _cmd_plan,
    "check": _cmd_check,
    "resilience": _cmd_resilience,
    "serve-env": _cmd_serve_env,
    "heatmap": _cmd_heatmap,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except planners.InstanceTooLargeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
