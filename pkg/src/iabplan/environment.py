"""Sequential deployment episodes and the newline-delimited wire service.

One episode: start from the donors-only state, deploy one candidate per
step (action = candidate id) or stop (action 0). The reward trades off
coverage gain in percentage points against a per-node deployment cost and
a penalty per node currently below the redundancy degree:

    reward = w_cov * delta_coverage_pp - w_deploy * deployed - w_vuln * n_vulnerable

The service speaks one JSON object per line over stdio or TCP; the exact
field names and ordering are pinned in docs/protocol.md. Sessions are
independent: the TCP server gives each connection its own environment.
"""

from __future__ import annotations

import json
import socketserver
import sys
from dataclasses import dataclass
from typing import IO

from . import constraints, netgraph, planners
from .netgraph import AttributedGraph, NetworkState
from .scenario import Scenario

PROTOCOL_VERSION = 1


@dataclass(frozen=True)
class RewardWeights:
    """Reward trade-off coefficients (coverage gain, node cost, vulnerability)."""

    coverage: float = 4.0
    deploy: float = 0.2
    vulnerability: float = 0.5


@dataclass
class StepResult:
    observation: AttributedGraph
    reward: float
    done: bool
    info: dict


class IllegalActionError(ValueError):
    """Action rejected by the mask; the episode state is unchanged."""

    def __init__(self, message: str, mask: list[bool]):
        super().__init__(message)
        self.mask = mask


class DeploymentEnv:
    """Single-episode-at-a-time deployment environment."""

    def __init__(
        self,
        scenario: Scenario,
        weights: RewardWeights | None = None,
        step_limit: int | None = None,
    ):
        self.scenario = scenario
        self.weights = weights or RewardWeights()
        self.step_limit = step_limit if step_limit is not None else len(scenario.candidate_ids)
        self.state: NetworkState | None = None
        self.steps = 0
        self.seed = 0

    def reset(self, seed: int = 0) -> AttributedGraph:
        """Start a new episode from the donors-only state."""
        self.seed = seed
        self.state = NetworkState.initial(self.scenario)
        self.steps = 0
        return netgraph.build_graph(self.scenario, self.state)

    def _mask(self) -> list[bool]:
        assert self.state is not None
        graph = netgraph.build_graph(self.scenario, self.state)
        return [bool(b) for b in graph.action_mask]

    def step(self, action: int) -> StepResult:
        """Apply one action; raises IllegalActionError on masked/unknown ones."""
        if self.state is None:
            raise RuntimeError("step() before reset()")
        mask = self._mask()
        valid_type = isinstance(action, int) and not isinstance(action, bool)
        if not valid_type or not 0 <= action < len(mask) or not mask[action]:
            raise IllegalActionError(f"action {action!r} not allowed", mask)

        scenario = self.scenario
        n_cells = len(scenario.coverage_cells)
        old_covered = len(self.state.covered_cells)
        old_fraction = old_covered / n_cells if n_cells else 1.0

        stopped = action == 0
        if stopped:
            delta_pp = 0.0
            deploy_flag = 0
            new_fraction = old_fraction
        else:
            planners.deploy_node(scenario, self.state, action)
            self.steps += 1
            new_covered = len(self.state.covered_cells)
            delta_pp = (new_covered - old_covered) * 100.0 / n_cells if n_cells else 0.0
            deploy_flag = 1
            new_fraction = new_covered / n_cells if n_cells else 1.0

        vulnerable = constraints.resilience_check(self.state, scenario.resilience_degree)
        n_vulnerable = len(vulnerable)

        w = self.weights
        coverage_term = w.coverage * delta_pp
        deploy_term = -w.deploy * deploy_flag
        vulnerability_term = -w.vulnerability * n_vulnerable
        reward = coverage_term + deploy_term + vulnerability_term

        target_met = new_fraction + constraints.COVERAGE_TOLERANCE >= scenario.coverage_target
        done = stopped or target_met or self.steps >= self.step_limit

        observation = netgraph.build_graph(scenario, self.state)
        info = {
            "coverage_fraction": new_fraction,
            "nodes_deployed": len(self.state.deployed_candidates),
            "vulnerable_count": n_vulnerable,
            "reward_components": {
                "coverage_term": coverage_term,
                "deploy_term": deploy_term,
                "vulnerability_term": vulnerability_term,
            },
        }
        return StepResult(observation=observation, reward=reward, done=done, info=info)


# -- wire protocol ------------------------------------------------------------


def _obs_reply(graph: AttributedGraph) -> dict:
    wire = graph.to_wire()
    return {"protocol": PROTOCOL_VERSION, "obs": wire, "mask": wire["mask"]}


class EnvSession:
    """One protocol session: line in, reply dict out. Never raises."""

    def __init__(self, scenario: Scenario, weights: RewardWeights | None = None):
        self.env = DeploymentEnv(scenario, weights)
        self.started = False
        self.closed = False

    def handle_line(self, line: str) -> dict:
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as exc:
            return {"error": "malformed", "detail": str(exc)}
        if not isinstance(msg, dict) or "cmd" not in msg:
            return {"error": "malformed", "detail": "expected object with 'cmd'"}

        cmd = msg["cmd"]
        if cmd == "reset":
            seed = msg.get("seed", 0)
            if not isinstance(seed, int):
                return {"error": "malformed", "detail": "'seed' must be an integer"}
            graph = self.env.reset(seed)
            self.started = True
            return _obs_reply(graph)
        if cmd == "step":
            if not self.started:
                return {"error": "no_episode"}
            if "action" not in msg:
                return {"error": "malformed", "detail": "'step' needs 'action'"}
            try:
                result = self.env.step(msg["action"])
            except IllegalActionError as exc:
                return {"error": "illegal_action", "detail": str(exc), "mask": exc.mask}
            wire = result.observation.to_wire()
            return {
                "obs": wire,
                "reward": result.reward,
                "done": result.done,
                "info": result.info,
            }
        if cmd == "close":
            self.closed = True
            return {"closed": True}
        return {"error": "unknown_command", "detail": str(cmd)}


def encode_reply(reply: dict) -> str:
    """Canonical one-line encoding; key order is fixed by construction."""
    return json.dumps(reply) + "\n"


def serve_stream(
    scenario: Scenario,
    reader: IO[str],
    writer: IO[str],
    weights: RewardWeights | None = None,
) -> None:
    """Run one session over text streams until close/EOF."""
    session = EnvSession(scenario, weights)
    for line in reader:
        if not line.strip():
            continue
        reply = session.handle_line(line)
        writer.write(encode_reply(reply))
        writer.flush()
        if session.closed:
            break


def serve_stdio(scenario: Scenario, weights: RewardWeights | None = None) -> None:
    serve_stream(scenario, sys.stdin, sys.stdout, weights)


def serve_tcp(
    scenario: Scenario,
    host: str = "127.0.0.1",
    port: int = 0,
    weights: RewardWeights | None = None,
    ready_callback=None,
) -> None:
    """Serve concurrent TCP sessions; each connection gets its own env.

    ``ready_callback`` (if given) receives the bound (host, port) before
    the server starts accepting; handy when the OS picks the port.
    """

    class Handler(socketserver.StreamRequestHandler):
        def handle(self):
            session = EnvSession(scenario, weights)
            for raw in self.rfile:
                line = raw.decode("utf-8", errors="replace")
                if not line.strip():
                    continue
                reply = session.handle_line(line)
                self.wfile.write(encode_reply(reply).encode())
                self.wfile.flush()
                if session.closed:
                    break

    class Server(socketserver.ThreadingTCPServer):
        allow_reuse_address = True
        daemon_threads = True

    with Server((host, port), Handler) as server:
        if ready_callback is not None:
            ready_callback(server.server_address)
        server.serve_forever()
