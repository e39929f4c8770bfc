"""Acceptance suite: one test per release criterion, each printing a verdict.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the PASS lines.
"""

import json
import math
import random
import subprocess
import sys
import time

import numpy as np
import pytest

from iabplan import constraints, netgraph, planners, resilience
from iabplan.environment import DeploymentEnv
from iabplan.netgraph import NetworkState, build_graph, feasible_links
from iabplan.propagation import BACKHAUL, RadioParams, evaluate_link
from iabplan.scenario import build_grid_scenario

from .oracles import max_disjoint_donor_paths, naive_check, naive_cover_matrix, random_state
from .test_planners import make_gadget, random_small_instance


def report(name: str, detail: str) -> None:
    print(f"ACCEPTANCE PASS: {name}: {detail}")


def test_link_budget_exactness():
    params = RadioParams()
    assert params.tx_power_dbm == 30.0
    assert params.backhaul_gain_tx_dbi == 25.0
    assert params.backhaul_gain_rx_dbi == 25.0
    assert params.noise_figure_db == 7.0
    assert params.snr_threshold_db == 10.0

    budget = evaluate_link((0.0, 0.0), (100.0, 0.0), BACKHAUL, params)
    assert budget.total_loss_db == pytest.approx(109.50, abs=0.01)
    assert budget.rx_power_dbm == pytest.approx(-29.50, abs=0.01)
    assert budget.snr_db == pytest.approx(51.48, abs=0.01)
    report(
        "link-budget exactness",
        f"loss {budget.total_loss_db:.4f} dB, rx {budget.rx_power_dbm:.4f} dBm, "
        f"snr {budget.snr_db:.4f} dB, defaults verified",
    )


def test_constraint_checker_oracle_equivalence(toy_scenario):
    cover = naive_cover_matrix(toy_scenario)
    rng = random.Random(2024)
    disagreements = 0
    for _ in range(1000):
        state = random_state(toy_scenario, rng)
        fast = constraints.check_all(toy_scenario, state)
        slow = naive_check(toy_scenario, state, cover)
        same = (
            fast.coverage_ok == slow.coverage_ok
            and fast.vulnerable_nodes == slow.vulnerable
            and fast.link_capacity_violations == slow.link_violations
            and fast.donor_capacity_violations == slow.donor_violations
            and fast.flow_conservation_violations == slow.conservation_violations
            and fast.overall_feasible == slow.overall
        )
        disagreements += 0 if same else 1
    assert disagreements == 0
    report("constraint-checker oracle equivalence", "1000 random states, 0 disagreements")


def test_exact_oracle_dominance():
    start = time.perf_counter()
    rng = random.Random(77)
    wins = 0
    for i in range(50):
        scenario = random_small_instance(rng, n_candidates=rng.randint(8, 12))
        exact = planners.exact_plan(scenario)
        greedy = planners.greedy_plan(scenario)
        assert exact is not None, f"instance {i}: exact failed"
        assert greedy.complete, f"instance {i}: greedy failed"
        assert exact.node_count <= greedy.node_count, f"instance {i}"
        wins += 1

    gadget = make_gadget()
    exact = planners.exact_plan(gadget)
    greedy = planners.greedy_plan(gadget)
    assert exact is not None and exact.node_count < greedy.node_count

    elapsed = time.perf_counter() - start
    assert elapsed < 60.0
    report(
        "exact-oracle dominance",
        f"{wins}/50 instances exact <= greedy; gadget {exact.node_count} < "
        f"{greedy.node_count}; {elapsed:.1f}s",
    )


def test_greedy_scale_check(default_scenario):
    start = time.perf_counter()
    result = planners.greedy_plan(default_scenario)
    elapsed = time.perf_counter() - start
    assert result.complete
    assert result.coverage_fraction >= 0.98
    assert 22 <= result.node_count <= 36
    assert elapsed < 30.0
    report(
        "greedy scale check",
        f"{result.node_count} nodes, coverage {result.coverage_fraction:.4f}, "
        f"{elapsed:.1f}s",
    )


def _single_path_variant(scenario, deployed: set[int]) -> NetworkState:
    """Min-hop forest over budget-feasible links: one inbound per node."""
    state = NetworkState.initial(scenario)
    state.deployed |= deployed
    parent: dict[int, int] = {}
    depth = {d: 0 for d in sorted(scenario.donor_ids)}
    frontier = sorted(scenario.donor_ids)
    while frontier:
        nxt = []
        for p in frontier:
            for q in sorted(deployed - set(depth)):
                budget = netgraph.backhaul_budget(scenario, p, q)
                if budget is None:
                    continue
                if q not in depth:
                    depth[q] = depth[p] + 1
                    parent[q] = p
                    nxt.append(q)
        frontier = nxt
    assert set(parent) == deployed, "single-path variant must reach every node"
    state.active_links = {(p, q) for q, p in parent.items()}
    allocation = constraints.allocate_flows(scenario, state)
    state.flows_mbps = allocation.flows_mbps
    netgraph.refresh_coverage(scenario, state)
    return state


def _ensure_disjoint_paths(scenario, state: NetworkState) -> None:
    """Activate extra inbound links until every node has 2 disjoint paths."""
    for node in sorted(state.deployed_candidates):
        guard = 0
        while max_disjoint_donor_paths(state, node) < 2:
            extra = [
                p
                for _, p in planners.feasible_deployed_sources(scenario, state, node)
                if (p, node) not in state.active_links
            ]
            assert extra, f"no further sources to make node {node} redundant"
            state.active_links.add((extra[0], node))
            guard += 1
            assert guard <= 10
    allocation = constraints.allocate_flows(scenario, state)
    state.flows_mbps = allocation.flows_mbps


def test_resilience_monotonicity_and_redundancy_benefit(default_scenario):
    greedy = planners.greedy_plan(default_scenario)
    redundant = greedy.state.copy()
    _ensure_disjoint_paths(default_scenario, redundant)
    for node in sorted(redundant.deployed_candidates):
        assert netgraph.inbound_degree(redundant, node) >= 2
        assert max_disjoint_donor_paths(redundant, node) >= 2

    stats = resilience.run_trials(
        default_scenario, redundant, (0.1, 0.2, 0.3), n_trials=100, master_seed=11
    )
    means = [s.retention_mean for s in stats]
    assert means[0] > means[1] > means[2], "retention must fall as failures rise"

    fragile = _single_path_variant(default_scenario, set(greedy.state.deployed_candidates))
    assert len(fragile.deployed_candidates) == len(redundant.deployed_candidates)
    fragile_stats = resilience.run_trials(
        default_scenario, fragile, (0.3,), n_trials=100, master_seed=11
    )
    gap_pp = (means[2] - fragile_stats[0].retention_mean) * 100.0
    assert gap_pp >= 5.0
    report(
        "resilience monotonicity + redundancy benefit",
        f"means {means[0]:.3f}/{means[1]:.3f}/{means[2]:.3f}; "
        f"redundant beats single-path by {gap_pp:.1f} pp at 30% failures",
    )


def test_determinism(tmp_path, single_donor_toy):
    # Planners: byte-identical files across separate OS processes.
    scenario_path = tmp_path / "toy.json"
    from iabplan.scenario import save_scenario

    save_scenario(single_donor_toy, scenario_path)
    outputs = []
    for run in range(2):
        plan_path = tmp_path / f"plan{run}.json"
        subprocess.run(
            [sys.executable, "-m", "iabplan.cli", "plan", str(scenario_path),
             "greedy", "-o", str(plan_path)],
            check=True,
            capture_output=True,
        )
        outputs.append(plan_path.read_bytes())
    assert outputs[0] == outputs[1]

    a = planners.random_plan(single_donor_toy, seed=3)
    b = planners.random_plan(single_donor_toy, seed=3)
    assert planners.deployment_to_json(single_donor_toy, a) == planners.deployment_to_json(
        single_donor_toy, b
    )

    def rollout_bytes():
        env = DeploymentEnv(single_donor_toy)
        blobs = [json.dumps(env.reset(9).to_wire())]
        for action in sorted(single_donor_toy.candidate_ids)[:5]:
            result = env.step(action)
            blobs.append(json.dumps(result.observation.to_wire()))
            blobs.append(repr(result.reward))
            if result.done:
                break
        return blobs

    assert rollout_bytes() == rollout_bytes()

    t1 = resilience.run_trials(single_donor_toy, a.state, (0.2,), 40, master_seed=8)
    t2 = resilience.run_trials(single_donor_toy, a.state, (0.2,), 40, master_seed=8)
    assert t1[0].retentions == t2[0].retentions
    report("determinism", "planners, rollouts and trials byte-reproducible")


def test_complexity_scaling():
    sizes = []
    timings = []
    for cap in (1, 2, 4, 8):
        scenario = build_grid_scenario("five_dice", backhaul_degree_cap=cap)
        edges = feasible_links(scenario)
        assert len(edges) == len(scenario.node_ids) * cap
        state = NetworkState.initial(scenario)
        best = math.inf
        for _ in range(7):
            t0 = time.perf_counter()
            graph = build_graph(scenario, state)
            payload = json.dumps(graph.to_wire())
            best = min(best, time.perf_counter() - t0)
        assert payload  # serialization really happened
        sizes.append(len(edges))
        timings.append(best)

    slope = np.polyfit(np.log(sizes), np.log(timings), 1)[0]
    assert slope <= 1.2, f"observation construction scales superlinearly: {slope:.2f}"
    report(
        "complexity scaling",
        "|E|=" + str(sizes) + f", fit exponent {slope:.2f} <= 1.2",
    )
