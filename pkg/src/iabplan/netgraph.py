"""Deployment state, the feasible-link digraph, and its attributed encoding.

Two different notions of backhaul feasibility coexist on purpose:

* :func:`backhaul_budget` answers "can p physically reach q" from the SNR
  budget alone. Link *activation* (state invariants, planners, constraint
  checks) uses this notion.
* :func:`feasible_links` additionally caps each node's outbound edges to
  its ``backhaul_degree_cap`` nearest feasible targets. That capped digraph
  is the attributed-graph edge set the policy network sees; without the cap
  the 60 GHz budget makes the graph near-complete and observation sizes
  explode quadratically.

Active links that fall outside the capped digraph are therefore invisible
as edges in the encoding, but still show up in the inbound-degree node
feature.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np

from .propagation import ACCESS, BACKHAUL, LinkBudget, evaluate_link
from .scenario import Scenario

Link = tuple[int, int]


@dataclass
class NetworkState:
    """Mutable deployment state: who is deployed, linked, carrying what."""

    deployed: set[int]
    active_links: set[Link]
    flows_mbps: dict[Link, float]
    covered_cells: set[int]
    donor_ids: frozenset[int]
    node_ids: frozenset[int]

    @classmethod
    def initial(cls, scenario: Scenario) -> "NetworkState":
        """Donors-only state with their own access footprint."""
        state = cls(
            deployed=set(scenario.donor_ids),
            active_links=set(),
            flows_mbps={},
            covered_cells=set(),
            donor_ids=scenario.donor_ids,
            node_ids=scenario.node_ids,
        )
        refresh_coverage(scenario, state)
        return state

    def copy(self) -> "NetworkState":
        return NetworkState(
            deployed=set(self.deployed),
            active_links=set(self.active_links),
            flows_mbps=dict(self.flows_mbps),
            covered_cells=set(self.covered_cells),
            donor_ids=self.donor_ids,
            node_ids=self.node_ids,
        )

    @property
    def deployed_candidates(self) -> set[int]:
        return self.deployed - self.donor_ids

    def validate(self, scenario: Scenario) -> None:
        """Invariants: donors deployed, links budget-feasible between deployed
        endpoints and terminating at candidates, flows non-negative on active
        links only."""
        if not scenario.donor_ids <= self.deployed:
            raise ValueError("donors must always be deployed")
        if not self.deployed <= self.node_ids:
            raise ValueError("deployed set contains unknown node ids")
        for p, q in self.active_links:
            if p not in self.deployed or q not in self.deployed:
                raise ValueError(f"active link ({p},{q}) has an undeployed endpoint")
            if q in self.donor_ids:
                raise ValueError(f"active link ({p},{q}) terminates at a donor")
            if backhaul_budget(scenario, p, q) is None:
                raise ValueError(f"active link ({p},{q}) is not budget-feasible")
        for (p, q), flow in self.flows_mbps.items():
            if (p, q) not in self.active_links:
                raise ValueError(f"flow on inactive link ({p},{q})")
            if flow < 0:
                raise ValueError(f"negative flow on link ({p},{q})")


def inbound_degree(state: NetworkState, node_id: int) -> int:
    """Number of active inbound backhaul links terminating at ``node_id``."""
    if node_id not in state.node_ids:
        raise KeyError(f"unknown node id {node_id}")
    return sum(1 for _, q in state.active_links if q == node_id)


# -- scenario-level caches ----------------------------------------------------

_LINK_CACHE: "weakref.WeakKeyDictionary[Scenario, dict[Link, float]]" = (
    weakref.WeakKeyDictionary()
)
_COVER_CACHE: "weakref.WeakKeyDictionary[Scenario, dict[int, frozenset[int]]]" = (
    weakref.WeakKeyDictionary()
)
_CMAX_CACHE: "weakref.WeakKeyDictionary[Scenario, float]" = weakref.WeakKeyDictionary()
_POS_CACHE: "weakref.WeakKeyDictionary[Scenario, dict[int, tuple[float, float]]]" = (
    weakref.WeakKeyDictionary()
)


def node_positions(scenario: Scenario) -> dict[int, tuple[float, float]]:
    """Cached id -> position map over donors and candidates."""
    pos = _POS_CACHE.get(scenario)
    if pos is None:
        pos = scenario.positions()
        _POS_CACHE[scenario] = pos
    return pos


def backhaul_budget(scenario: Scenario, p: int, q: int) -> LinkBudget | None:
    """Budget for directed backhaul p -> q, or None if infeasible.

    q must be a candidate (donors never terminate backhaul links).
    """
    if q in scenario.donor_ids or p == q:
        return None
    pos = node_positions(scenario)
    budget = evaluate_link(pos[p], pos[q], BACKHAUL, scenario.radio)
    return budget if budget.feasible else None


def feasible_links(scenario: Scenario) -> dict[Link, float]:
    """Directed capped edge set with capacities (Mbps), cached per scenario.

    Edge (p, q) exists iff the backhaul budget is feasible, q is a
    candidate, p != q, and q ranks among p's k nearest feasible targets
    (k = ``backhaul_degree_cap``). Both directions are judged
    independently.
    """
    cached = _LINK_CACHE.get(scenario)
    if cached is not None:
        return cached

    pos = node_positions(scenario)
    node_order = sorted(scenario.node_ids)
    cand_order = sorted(scenario.candidate_ids)
    cand_xy = np.array([pos[c] for c in cand_order])

    edges: dict[Link, float] = {}
    k = scenario.backhaul_degree_cap
    for p in node_order:
        px, py = pos[p]
        d2 = (cand_xy[:, 0] - px) ** 2 + (cand_xy[:, 1] - py) ** 2
        taken = 0
        for idx in np.argsort(d2, kind="stable"):
            q = cand_order[idx]
            if q == p:
                continue
            budget = backhaul_budget(scenario, p, q)
            if budget is None:
                # Monotone budget: everything farther is infeasible too.
                break
            edges[(p, q)] = budget.capacity_mbps
            taken += 1
            if taken >= k:
                break

    _LINK_CACHE[scenario] = edges
    return edges


def max_link_capacity(scenario: Scenario) -> float:
    """Scenario-level normalizer: capacity of the strongest capped edge."""
    cached = _CMAX_CACHE.get(scenario)
    if cached is None:
        edges = feasible_links(scenario)
        cached = max(edges.values(), default=1.0)
        _CMAX_CACHE[scenario] = cached
    return cached


def access_cover_map(scenario: Scenario) -> dict[int, frozenset[int]]:
    """Cell ids coverable by each donor/candidate via the access budget."""
    cached = _COVER_CACHE.get(scenario)
    if cached is not None:
        return cached
    cover: dict[int, frozenset[int]] = {}
    for node_id, npos in scenario.donors + scenario.candidates:
        cells = set()
        for cell_id, cpos in scenario.coverage_cells:
            if npos == cpos:
                cells.add(cell_id)  # co-located: zero path, trivially covered
                continue
            if evaluate_link(npos, cpos, ACCESS, scenario.radio).feasible:
                cells.add(cell_id)
        cover[node_id] = frozenset(cells)
    _COVER_CACHE[scenario] = cover
    return cover


def refresh_coverage(scenario: Scenario, state: NetworkState) -> None:
    """Recompute ``covered_cells`` from the current deployment."""
    cover = access_cover_map(scenario)
    covered: set[int] = set()
    for node in state.deployed:
        covered |= cover[node]
    state.covered_cells = covered


def coverage_fraction(scenario: Scenario, state: NetworkState) -> float:
    n = len(scenario.coverage_cells)
    return len(state.covered_cells) / n if n else 1.0


# -- attributed graph ---------------------------------------------------------


@dataclass
class AttributedGraph:
    """Feature encoding of (scenario, state) for the policy network."""

    node_ids: list[int]
    node_features: np.ndarray  # (V, 4): alpha, demand_norm, resil_ratio, is_donor
    edge_list: list[Link]  # directed (src, dst) node ids
    edge_features: np.ndarray  # (E, 3): cap_norm, utilization, feasible
    global_features: np.ndarray  # coverage target, resilience degree, backup, overhead
    action_mask: np.ndarray  # (n_candidates + 1,) bool; index 0 = stop action

    def to_wire(self) -> dict:
        """Canonical wire form (see docs/protocol.md for the schema)."""
        nodes = [
            {
                "id": int(i),
                "alpha": float(f[0]),
                "demand": float(f[1]),
                "resil_ratio": float(f[2]),
                "is_donor": float(f[3]),
            }
            for i, f in zip(self.node_ids, self.node_features)
        ]
        edges = [
            {
                "src": int(p),
                "dst": int(q),
                "cap": float(f[0]),
                "util": float(f[1]),
                "feas": float(f[2]),
            }
            for (p, q), f in zip(self.edge_list, self.edge_features)
        ]
        return {
            "nodes": nodes,
            "edges": edges,
            "global": [float(g) for g in self.global_features],
            "mask": [bool(b) for b in self.action_mask],
        }


def build_graph(scenario: Scenario, state: NetworkState) -> AttributedGraph:
    """Encode the deployment state as the attributed digraph.

    Pure function of its inputs: identical (scenario, state) pairs yield
    identical tensors. Demand normalization guards against an all-zero
    demand map; edge capacity normalization uses the scenario-level max so
    features stay stable across an episode.
    """
    node_ids = sorted(scenario.node_ids)
    demands = scenario.demand_mbps
    a_max = max((demands.get(i, 0.0) for i in node_ids), default=0.0)
    if a_max <= 0:
        a_max = 1.0
    m = scenario.resilience_degree

    inbound: dict[int, int] = {i: 0 for i in node_ids}
    for _, q in state.active_links:
        inbound[q] += 1

    feats = np.zeros((len(node_ids), 4))
    for row, i in enumerate(node_ids):
        feats[row, 0] = 1.0 if i in state.deployed else 0.0
        feats[row, 1] = demands.get(i, 0.0) / a_max
        feats[row, 2] = inbound[i] / m
        feats[row, 3] = 1.0 if i in scenario.donor_ids else 0.0

    edges = feasible_links(scenario)
    c_max = max_link_capacity(scenario)
    edge_list = sorted(edges)
    efeats = np.zeros((len(edge_list), 3))
    for row, (p, q) in enumerate(edge_list):
        cap = edges[(p, q)]
        if cap <= 0:
            raise RuntimeError(f"listed edge ({p},{q}) has non-positive capacity")
        flow = state.flows_mbps.get((p, q), 0.0)
        efeats[row, 0] = cap / c_max
        efeats[row, 1] = min(1.0, flow / cap)
        efeats[row, 2] = 1.0

    glob = np.array(
        [
            scenario.coverage_target,
            float(scenario.resilience_degree),
            scenario.backup_fraction,
            scenario.overhead_factor,
        ]
    )

    n_candidates = len(scenario.candidate_ids)
    mask = np.zeros(n_candidates + 1, dtype=bool)
    mask[0] = True
    for c in scenario.candidate_ids:
        if c not in state.deployed:
            mask[c] = True

    return AttributedGraph(
        node_ids=node_ids,
        node_features=feats,
        edge_list=edge_list,
        edge_features=efeats,
        global_features=glob,
        action_mask=mask,
    )
