"""Constraint validation and flow allocation for deployment states.

``check_all`` validates a state exactly as given: coverage indicators are
recomputed from geometry (their maximal consistent assignment), resilience
from active inbound link counts, and the capacity/conservation checks run
against the flows stored on the state. Producing feasible flows is the
separate job of :func:`allocate_flows`, which planners run after every
topology change.

The routing in ``allocate_flows`` is a min-hop forest rooted at the donors
with deterministic tie-breaks. It is a sound feasibility certificate, not
a complete one: a state it certifies is feasible, but a state it fails may
still admit some cleverer multi-path routing.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .netgraph import NetworkState, backhaul_budget
from .scenario import Scenario

# Shared slack for flow inequality checks; float summation order must not
# flip a verdict between independent checker implementations.
FLOW_TOLERANCE_MBPS = 1e-6

# Matching slack for coverage-fraction comparisons against the target.
COVERAGE_TOLERANCE = 1e-12


@dataclass
class FlowAllocation:
    """Outcome of routing or validating demand over the active links."""

    flows_mbps: dict[tuple[int, int], float]
    unreachable: list[int] = field(default_factory=list)
    link_capacity_violations: list[tuple[int, int]] = field(default_factory=list)
    donor_capacity_violations: list[int] = field(default_factory=list)
    flow_conservation_violations: list[int] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return (
            not self.unreachable
            and not self.link_capacity_violations
            and not self.donor_capacity_violations
            and not self.flow_conservation_violations
        )


@dataclass
class ConstraintReport:
    """Per-constraint verdicts for one (scenario, state) pair."""

    coverage_fraction: float
    coverage_ok: bool
    cell_coverage: dict[int, int]
    vulnerable_nodes: list[int]
    link_capacity_violations: list[tuple[int, int]]
    donor_capacity_violations: list[int]
    flow_conservation_violations: list[int]
    objective_value: int
    overall_feasible: bool

    def to_text(self) -> str:
        lines = [
            f"coverage: {self.coverage_fraction:.4f} "
            f"({'ok' if self.coverage_ok else 'BELOW TARGET'})",
            f"deployed nodes (objective): {self.objective_value}",
        ]
        checks = [
            ("resilience", self.vulnerable_nodes),
            ("link capacity", self.link_capacity_violations),
            ("donor capacity", self.donor_capacity_violations),
            ("flow conservation", self.flow_conservation_violations),
        ]
        for name, violations in checks:
            if violations:
                lines.append(f"{name}: FAIL {violations}")
            else:
                lines.append(f"{name}: ok")
        lines.append(f"overall: {'FEASIBLE' if self.overall_feasible else 'INFEASIBLE'}")
        return "\n".join(lines)


def coverage_indicators(
    scenario: Scenario, state: NetworkState
) -> tuple[dict[int, int], float]:
    """Per-cell coverage indicator and the covered fraction.

    A cell counts as covered when any deployed donor or node reaches its
    center with access SNR at or above the threshold.
    """
    from .netgraph import access_cover_map

    cover = access_cover_map(scenario)
    covered: set[int] = set()
    for node in state.deployed:
        covered |= cover[node]
    cells = {cell_id: (1 if cell_id in covered else 0) for cell_id, _ in scenario.coverage_cells}
    n = len(cells)
    fraction = (sum(cells.values()) / n) if n else 1.0
    return cells, fraction


def resilience_check(state: NetworkState, min_inbound: int) -> list[int]:
    """Deployed candidates with fewer than ``min_inbound`` active inbound links.

    Donors are never vulnerable; undeployed candidates are not gated.
    """
    inbound: dict[int, int] = {}
    for _, q in state.active_links:
        inbound[q] = inbound.get(q, 0) + 1
    return sorted(
        j
        for j in state.deployed_candidates
        if inbound.get(j, 0) < min_inbound
    )


def _link_limit(scenario: Scenario, p: int, q: int) -> float:
    """Usable share of a link's capacity after the backup reservation."""
    budget = backhaul_budget(scenario, p, q)
    if budget is None:
        return 0.0
    return (1.0 - scenario.backup_fraction) * budget.capacity_mbps


def validate_flows(scenario: Scenario, state: NetworkState) -> FlowAllocation:
    """Check the state's stored flows against capacity and conservation.

    Returns the violations wrapped in a :class:`FlowAllocation` carrying
    the checked flows unchanged. Conservation requires every deployed
    candidate's inbound flow to cover its own demand plus everything it
    forwards, inflated by the protocol overhead factor.
    """
    flows = state.flows_mbps
    result = FlowAllocation(flows_mbps=dict(flows))

    for (p, q), flow in sorted(flows.items()):
        if flow > _link_limit(scenario, p, q) + FLOW_TOLERANCE_MBPS:
            result.link_capacity_violations.append((p, q))

    overhead = scenario.overhead_factor
    for donor in sorted(state.donor_ids):
        outbound = sum(f for (p, _), f in flows.items() if p == donor)
        load = outbound + overhead * scenario.demand_of(donor)
        if load > scenario.donor_fiber_mbps + FLOW_TOLERANCE_MBPS:
            result.donor_capacity_violations.append(donor)

    for j in sorted(state.deployed_candidates):
        inbound = sum(f for (_, q), f in flows.items() if q == j)
        outbound = sum(f for (p, _), f in flows.items() if p == j)
        required = overhead * (scenario.demand_of(j) + outbound)
        if inbound + FLOW_TOLERANCE_MBPS < required:
            result.flow_conservation_violations.append(j)

    return result


def allocate_flows(scenario: Scenario, state: NetworkState) -> FlowAllocation:
    """Route every deployed candidate's demand to the donors and verify it.

    Builds a min-hop forest over the active links (donors at depth zero),
    breaking parent ties by higher link capacity then lower parent id,
    then aggregates demand leaf-to-root with the overhead factor applied
    at every hop. Deployed candidates no surviving path reaches are
    returned as ``unreachable``.
    """
    children: dict[int, list[int]] = {}
    parent: dict[int, tuple[int, float]] = {}  # node -> (parent, link capacity)
    depth: dict[int, int] = {d: 0 for d in sorted(state.donor_ids)}

    outgoing: dict[int, list[int]] = {}
    for p, q in state.active_links:
        outgoing.setdefault(p, []).append(q)

    frontier = deque(sorted(state.donor_ids))
    while frontier:
        p = frontier.popleft()
        for q in sorted(outgoing.get(p, ())):
            if q not in state.deployed:
                continue
            budget = backhaul_budget(scenario, p, q)
            cap = budget.capacity_mbps if budget else 0.0
            if q not in depth:
                depth[q] = depth[p] + 1
                parent[q] = (p, cap)
                frontier.append(q)
            elif depth[q] == depth[p] + 1:
                # Same hop count: prefer the fatter link, then the lower id.
                best_p, best_cap = parent[q]
                if cap > best_cap or (cap == best_cap and p < best_p):
                    parent[q] = (p, cap)

    unreachable = sorted(j for j in state.deployed_candidates if j not in depth)

    for q, (p, _) in parent.items():
        children.setdefault(p, []).append(q)

    flows: dict[tuple[int, int], float] = {link: 0.0 for link in state.active_links}
    overhead = scenario.overhead_factor

    # Iterative post-order to keep deep chains off the recursion limit.
    order: list[int] = []
    stack = list(sorted(state.donor_ids))
    while stack:
        node = stack.pop()
        order.append(node)
        stack.extend(sorted(children.get(node, ())))
    inflow: dict[int, float] = {}
    for node in reversed(order):
        forwarded = sum(inflow[c] for c in sorted(children.get(node, ())))
        inflow[node] = overhead * (scenario.demand_of(node) + forwarded)
    for q, (p, _) in parent.items():
        flows[(p, q)] = inflow[q]

    checked = NetworkState(
        deployed=state.deployed,
        active_links=state.active_links,
        flows_mbps=flows,
        covered_cells=state.covered_cells,
        donor_ids=state.donor_ids,
        node_ids=state.node_ids,
    )
    verified = validate_flows(scenario, checked)
    unreachable_set = set(unreachable)
    return FlowAllocation(
        flows_mbps=flows,
        unreachable=unreachable,
        link_capacity_violations=verified.link_capacity_violations,
        donor_capacity_violations=verified.donor_capacity_violations,
        flow_conservation_violations=[
            j for j in verified.flow_conservation_violations if j not in unreachable_set
        ],
    )


def check_all(scenario: Scenario, state: NetworkState) -> ConstraintReport:
    """Aggregate every constraint into one report. Never raises."""
    cells, fraction = coverage_indicators(scenario, state)
    coverage_ok = fraction + COVERAGE_TOLERANCE >= scenario.coverage_target
    vulnerable = resilience_check(state, scenario.resilience_degree)
    flow_report = validate_flows(scenario, state)
    objective = len(state.deployed_candidates)
    overall = (
        coverage_ok
        and not vulnerable
        and not flow_report.link_capacity_violations
        and not flow_report.donor_capacity_violations
        and not flow_report.flow_conservation_violations
    )
    return ConstraintReport(
        coverage_fraction=fraction,
        coverage_ok=coverage_ok,
        cell_coverage=cells,
        vulnerable_nodes=vulnerable,
        link_capacity_violations=flow_report.link_capacity_violations,
        donor_capacity_violations=flow_report.donor_capacity_violations,
        flow_conservation_violations=flow_report.flow_conservation_violations,
        objective_value=objective,
        overall_feasible=overall,
    )
