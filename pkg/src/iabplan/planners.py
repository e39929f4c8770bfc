"""Deployment planners: greedy coverage, exact minimum-node search, random.

The greedy planner matches the classic baseline: at each step it deploys
the candidate with the largest marginal covered-cell gain whose activation
still routes (reachability plus capacity). It does *not* require the
redundancy degree - single-connected nodes are allowed and merely recorded
as vulnerable, which is exactly what the failure experiments probe.

The exact planner is a small-instance oracle: subsets enumerated in
increasing cardinality with a coverage upper-bound prune, first fully
feasible subset wins, so the returned cardinality is minimal.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

from . import constraints, netgraph
from .netgraph import NetworkState
from .scenario import Scenario, scenario_fingerprint

DEPLOYMENT_FORMAT_VERSION = 1

# Cap on the exhaustive inbound-source fallback inside exact_plan.
_EXHAUSTIVE_COMBO_CAP = 20_000


class InstanceTooLargeError(ValueError):
    """exact_plan refused an instance above its candidate limit."""


@dataclass
class PlanResult:
    """A planner's output: final state plus summary bookkeeping."""

    state: NetworkState
    algorithm: str
    complete: bool
    coverage_fraction: float

    @property
    def deployed_candidates(self) -> list[int]:
        return sorted(self.state.deployed_candidates)

    @property
    def node_count(self) -> int:
        return len(self.state.deployed_candidates)


def _coverage_met(scenario: Scenario, fraction: float) -> bool:
    return fraction + constraints.COVERAGE_TOLERANCE >= scenario.coverage_target


def feasible_deployed_sources(
    scenario: Scenario, state: NetworkState, node: int
) -> list[tuple[float, int]]:
    """(capacity, source) pairs for deployed nodes that can reach ``node``,
    strongest link first, ties to the lower source id."""
    out = []
    for p in state.deployed:
        if p == node:
            continue
        budget = netgraph.backhaul_budget(scenario, p, node)
        if budget is not None:
            out.append((budget.capacity_mbps, p))
    out.sort(key=lambda item: (-item[0], item[1]))
    return out


def activate_links(scenario: Scenario, state: NetworkState, new_node: int) -> NetworkState:
    """Wire a freshly deployed node into the backhaul and re-route flows.

    Inbound for the new node comes from its strongest feasible deployed
    sources, up to the resilience degree. Previously deployed nodes still
    short of that degree pick up one inbound link from the new node when
    the budget allows. A node with no feasible source stays isolated (and
    therefore vulnerable).
    """
    m = scenario.resilience_degree
    for _, p in feasible_deployed_sources(scenario, state, new_node)[:m]:
        state.active_links.add((p, new_node))

    for q in sorted(state.deployed_candidates):
        if q == new_node:
            continue
        if netgraph.inbound_degree(state, q) >= m:
            continue
        if netgraph.backhaul_budget(scenario, new_node, q) is not None:
            state.active_links.add((new_node, q))

    allocation = constraints.allocate_flows(scenario, state)
    state.flows_mbps = allocation.flows_mbps
    return state


def deploy_node(scenario: Scenario, state: NetworkState, node: int) -> NetworkState:
    """Deploy one candidate: flag it, activate links, refresh coverage."""
    if node not in scenario.candidate_ids:
        raise ValueError(f"node {node} is not a candidate")
    if node in state.deployed:
        raise ValueError(f"node {node} is already deployed")
    state.deployed.add(node)
    activate_links(scenario, state, node)
    netgraph.refresh_coverage(scenario, state)
    return state


def _flow_clean(scenario: Scenario, state: NetworkState) -> bool:
    allocation = constraints.allocate_flows(scenario, state)
    return allocation.ok


def greedy_plan(scenario: Scenario) -> PlanResult:
    """Sequentially deploy the candidate with the best marginal coverage.

    Candidates whose activation cannot be routed (unreachable or over
    capacity) are skipped. Stops at the coverage target or when no
    candidate still improves coverage; the result is flagged incomplete in
    the latter case.
    """
    cover = netgraph.access_cover_map(scenario)
    state = NetworkState.initial(scenario)
    fraction = netgraph.coverage_fraction(scenario, state)

    while not _coverage_met(scenario, fraction):
        ranked = []
        for cand in sorted(scenario.candidate_ids - state.deployed):
            marginal = len(cover[cand] - state.covered_cells)
            if marginal > 0:
                n_sources = len(feasible_deployed_sources(scenario, state, cand))
                ranked.append((-marginal, -n_sources, cand))
        ranked.sort()

        placed = False
        for _, _, cand in ranked:
            trial = state.copy()
            deploy_node(scenario, trial, cand)
            if _flow_clean(scenario, trial):
                state = trial
                fraction = netgraph.coverage_fraction(scenario, state)
                placed = True
                break
        if not placed:
            return PlanResult(state, "greedy", complete=False, coverage_fraction=fraction)

    return PlanResult(state, "greedy", complete=True, coverage_fraction=fraction)


def random_plan(scenario: Scenario, seed: int) -> PlanResult:
    """Deploy uniformly random candidates until the target is met."""
    rng = random.Random(seed)
    order = sorted(scenario.candidate_ids)
    rng.shuffle(order)
    state = NetworkState.initial(scenario)
    fraction = netgraph.coverage_fraction(scenario, state)
    for cand in order:
        if _coverage_met(scenario, fraction):
            break
        deploy_node(scenario, state, cand)
        fraction = netgraph.coverage_fraction(scenario, state)
    return PlanResult(
        state,
        "random",
        complete=_coverage_met(scenario, fraction),
        coverage_fraction=fraction,
    )


def _build_subset_state(
    scenario: Scenario, subset: tuple[int, ...]
) -> NetworkState:
    """Deploy a whole subset, then give every member its top-m inbound."""
    state = NetworkState.initial(scenario)
    state.deployed |= set(subset)
    m = scenario.resilience_degree
    for node in sorted(subset):
        for _, p in feasible_deployed_sources(scenario, state, node)[:m]:
            state.active_links.add((p, node))
    allocation = constraints.allocate_flows(scenario, state)
    state.flows_mbps = allocation.flows_mbps
    netgraph.refresh_coverage(scenario, state)
    return state


def _exhaustive_activation(
    scenario: Scenario, subset: tuple[int, ...]
) -> NetworkState | None:
    """Try every bounded combination of inbound-source choices for a subset."""
    base = NetworkState.initial(scenario)
    base.deployed |= set(subset)
    m = scenario.resilience_degree

    options: list[list[tuple[tuple[int, int], ...]]] = []
    total = 1
    for node in sorted(subset):
        sources = [p for _, p in feasible_deployed_sources(scenario, base, node)]
        take = min(m, len(sources))
        if take == 0:
            return None
        node_choices = [
            tuple((p, node) for p in combo) for combo in combinations(sources, take)
        ]
        total *= len(node_choices)
        if total > _EXHAUSTIVE_COMBO_CAP:
            return None
        options.append(node_choices)

    def walk(idx: int, state: NetworkState) -> NetworkState | None:
        if idx == len(options):
            allocation = constraints.allocate_flows(scenario, state)
            state.flows_mbps = allocation.flows_mbps
            netgraph.refresh_coverage(scenario, state)
            report = constraints.check_all(scenario, state)
            return state if report.overall_feasible else None
        for choice in options[idx]:
            trial = state.copy()
            trial.active_links |= set(choice)
            found = walk(idx + 1, trial)
            if found is not None:
                return found
        return None

    return walk(0, base)


def exact_plan(scenario: Scenario, max_candidates: int = 15) -> PlanResult | None:
    """Minimum-cardinality deployment by exhaustive subset search.

    Refuses instances with more than ``max_candidates`` candidates.
    Returns None when no subset (including the full one) satisfies every
    constraint.
    """
    cand_ids = sorted(scenario.candidate_ids)
    if len(cand_ids) > max_candidates:
        raise InstanceTooLargeError(
            f"{len(cand_ids)} candidates exceeds the exact-search limit {max_candidates}"
        )

    cover = netgraph.access_cover_map(scenario)
    donor_cover: set[int] = set()
    for d in scenario.donor_ids:
        donor_cover |= cover[d]
    n_cells = len(scenario.coverage_cells)
    needed = 0
    while needed < n_cells and (needed / n_cells) + constraints.COVERAGE_TOLERANCE < scenario.coverage_target:
        needed += 1

    gains = sorted((len(cover[c] - donor_cover) for c in cand_ids), reverse=True)

    for size in range(len(cand_ids) + 1):
        if len(donor_cover) + sum(gains[:size]) < needed:
            continue
        for subset in combinations(cand_ids, size):
            union = set(donor_cover)
            for c in subset:
                union |= cover[c]
            if len(union) < needed:
                continue
            state = _build_subset_state(scenario, subset)
            report = constraints.check_all(scenario, state)
            if report.overall_feasible:
                return PlanResult(
                    state, "exact", complete=True,
                    coverage_fraction=report.coverage_fraction,
                )
            if len(subset) <= 10:
                alt = _exhaustive_activation(scenario, subset)
                if alt is not None:
                    return PlanResult(
                        alt, "exact", complete=True,
                        coverage_fraction=netgraph.coverage_fraction(scenario, alt),
                    )
    return None


# -- deployment files ---------------------------------------------------------


def deployment_to_json(scenario: Scenario, result: PlanResult) -> str:
    doc = {
        "format_version": DEPLOYMENT_FORMAT_VERSION,
        "scenario_fingerprint": scenario_fingerprint(scenario),
        "algorithm": result.algorithm,
        "complete": result.complete,
        "coverage_fraction": result.coverage_fraction,
        "deployed": result.deployed_candidates,
        "active_links": [[p, q] for p, q in sorted(result.state.active_links)],
        "flows_mbps": [
            [p, q, result.state.flows_mbps[(p, q)]]
            for p, q in sorted(result.state.flows_mbps)
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def save_deployment(scenario: Scenario, result: PlanResult, path: str | Path) -> None:
    Path(path).write_text(deployment_to_json(scenario, result))


def load_deployment(scenario: Scenario, path: str | Path) -> PlanResult:
    """Rebuild a PlanResult from file, verifying it matches the scenario."""
    doc = json.loads(Path(path).read_text())
    version = doc.get("format_version")
    if version != DEPLOYMENT_FORMAT_VERSION:
        raise ValueError(f"unsupported deployment format_version {version}")
    fingerprint = doc.get("scenario_fingerprint")
    if fingerprint != scenario_fingerprint(scenario):
        raise ValueError("deployment file was produced for a different scenario")

    state = NetworkState.initial(scenario)
    state.deployed |= {int(i) for i in doc["deployed"]}
    state.active_links = {(int(p), int(q)) for p, q in doc["active_links"]}
    state.flows_mbps = {(int(p), int(q)): float(f) for p, q, f in doc["flows_mbps"]}
    netgraph.refresh_coverage(scenario, state)
    state.validate(scenario)
    return PlanResult(
        state,
        str(doc.get("algorithm", "unknown")),
        complete=bool(doc.get("complete", True)),
        coverage_fraction=netgraph.coverage_fraction(scenario, state),
    )
