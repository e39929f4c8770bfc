import io
import json
import socket
import threading

import pytest

from iabplan import netgraph
from iabplan.environment import (
    DeploymentEnv,
    EnvSession,
    IllegalActionError,
    RewardWeights,
    encode_reply,
    serve_stream,
    serve_tcp,
)


def wire_bytes(graph) -> str:
    return json.dumps(graph.to_wire())


class TestReset:
    def test_candidates_start_undeployed(self, single_donor_toy):
        env = DeploymentEnv(single_donor_toy)
        obs = env.reset()
        for node_id, feats in zip(obs.node_ids, obs.node_features):
            if node_id in single_donor_toy.candidate_ids:
                assert feats[0] == 0.0

    def test_same_seed_identical_bytes(self, single_donor_toy):
        env = DeploymentEnv(single_donor_toy)
        a = wire_bytes(env.reset(42))
        b = wire_bytes(env.reset(42))
        assert a == b

    def test_mask_allows_stop_and_all_candidates(self, single_donor_toy):
        obs = DeploymentEnv(single_donor_toy).reset()
        assert obs.action_mask.all()
        assert len(obs.action_mask) == len(single_donor_toy.candidate_ids) + 1


class TestStep:
    def test_reward_formula_on_first_deploy(self, default_scenario):
        # Hunt for a candidate whose marginal footprint is exactly six cells:
        # with the default weights that is reward 4.0 * 1.5 - 0.2 = 5.8.
        cover = netgraph.access_cover_map(default_scenario)
        donor_cover = set()
        for d in default_scenario.donor_ids:
            donor_cover |= cover[d]
        six = next(
            c
            for c in sorted(default_scenario.candidate_ids)
            if len(cover[c] - donor_cover) == 6
        )
        env = DeploymentEnv(default_scenario)
        env.reset()
        result = env.step(six)
        assert result.info["vulnerable_count"] == 0
        assert result.reward == pytest.approx(4.0 * 1.5 - 0.2)
        components = result.info["reward_components"]
        assert components["coverage_term"] == pytest.approx(6.0)
        assert components["deploy_term"] == pytest.approx(-0.2)
        assert components["vulnerability_term"] == 0.0

    def test_reward_reconstructs_from_components(self, single_donor_toy):
        env = DeploymentEnv(single_donor_toy)
        env.reset()
        for action in sorted(single_donor_toy.candidate_ids)[:5]:
            result = env.step(action)
            total = sum(result.info["reward_components"].values())
            assert result.reward == pytest.approx(total, abs=1e-12)
            if result.done:
                break

    def test_isolated_node_covering_nothing(self):
        from iabplan.propagation import RadioParams
        from iabplan.scenario import Scenario

        # Candidate 2 sits 2 km out: no feasible source, no nearby cells.
        s = Scenario(
            area_m=(3000.0, 100.0),
            grid_spacing_m=100.0,
            donors=[(3, (0.0, 50.0))],
            candidates=[(1, (100.0, 50.0)), (2, (2500.0, 50.0))],
            coverage_cells=[(0, (50.0, 50.0)), (1, (150.0, 50.0))],
            demand_mbps={1: 100.0, 2: 100.0, 3: 100.0},
            donor_fiber_mbps=10_000.0,
            radio=RadioParams(),
            coverage_target=1.0,
            resilience_degree=2,
        )
        env = DeploymentEnv(s)
        env.reset()
        result = env.step(2)
        assert result.info["reward_components"]["coverage_term"] == 0.0
        assert result.reward == pytest.approx(-0.2 - 0.5 * 1)

    def test_stop_action_terminates_with_zero_reward(self, single_donor_toy):
        env = DeploymentEnv(single_donor_toy)
        env.reset()
        result = env.step(0)
        assert result.reward == 0.0
        assert result.done

    def test_masked_action_rejected_without_state_change(self, single_donor_toy):
        env = DeploymentEnv(single_donor_toy)
        env.reset()
        env.step(1)
        deployed_before = set(env.state.deployed)
        with pytest.raises(IllegalActionError):
            env.step(1)  # already deployed
        assert env.state.deployed == deployed_before
        with pytest.raises(IllegalActionError):
            env.step(99999)

    def test_step_before_reset_rejected(self, single_donor_toy):
        with pytest.raises(RuntimeError):
            DeploymentEnv(single_donor_toy).step(1)

    def test_done_at_coverage_target(self, single_donor_toy):
        env = DeploymentEnv(single_donor_toy)
        env.reset()
        done = False
        steps = 0
        while not done:
            obs = netgraph.build_graph(single_donor_toy, env.state)
            action = next(
                i for i in range(1, len(obs.action_mask)) if obs.action_mask[i]
            )
            result = env.step(action)
            done = result.done
            steps += 1
            assert steps <= len(single_donor_toy.candidate_ids)
        assert (
            result.info["coverage_fraction"] >= single_donor_toy.coverage_target
            or steps == len(single_donor_toy.candidate_ids)
        )

    def test_step_limit_terminates_episode(self):
        from iabplan.propagation import RadioParams
        from iabplan.scenario import Scenario

        # Unreachable coverage target: the episode must end at the limit.
        s = Scenario(
            area_m=(500.0, 100.0),
            grid_spacing_m=100.0,
            donors=[(3, (0.0, 50.0))],
            candidates=[(1, (100.0, 50.0)), (2, (200.0, 50.0))],
            coverage_cells=[(0, (450.0, 50.0))],  # nobody reaches this cell
            demand_mbps={1: 100.0, 2: 100.0, 3: 100.0},
            donor_fiber_mbps=10_000.0,
            radio=RadioParams(),
            coverage_target=1.0,
            resilience_degree=1,
        )
        env = DeploymentEnv(s)
        env.reset()
        first = env.step(1)
        assert not first.done
        last = env.step(2)
        assert last.done  # two candidates deployed = step limit
        assert last.info["coverage_fraction"] < 1.0

    def test_coverage_nondecreasing_and_mask_shrinks(self, single_donor_toy):
        env = DeploymentEnv(single_donor_toy)
        env.reset()
        last = 0.0
        for action in sorted(single_donor_toy.candidate_ids)[:6]:
            result = env.step(action)
            assert result.info["coverage_fraction"] >= last
            last = result.info["coverage_fraction"]
            assert not result.observation.action_mask[action]
            if result.done:
                break

    def test_return_telescopes_to_total_coverage_gain(self, single_donor_toy):
        weights = RewardWeights()
        env = DeploymentEnv(single_donor_toy, weights)
        obs = env.reset()
        initial = netgraph.coverage_fraction(single_donor_toy, env.state)
        coverage_sum = 0.0
        done = False
        actions = iter(sorted(single_donor_toy.candidate_ids))
        while not done:
            result = env.step(next(actions))
            coverage_sum += result.info["reward_components"]["coverage_term"]
            done = result.done
        final = result.info["coverage_fraction"]
        assert coverage_sum == pytest.approx(
            weights.coverage * (final - initial) * 100.0, abs=1e-9
        )

    def test_rollout_fully_deterministic(self, single_donor_toy):
        def rollout():
            env = DeploymentEnv(single_donor_toy)
            blobs = [wire_bytes(env.reset(5))]
            rewards = []
            for action in sorted(single_donor_toy.candidate_ids)[:4]:
                result = env.step(action)
                blobs.append(wire_bytes(result.observation))
                rewards.append(result.reward)
                if result.done:
                    break
            return blobs, rewards

        assert rollout() == rollout()


class TestSession:
    def test_protocol_round_trip(self, single_donor_toy):
        session = EnvSession(single_donor_toy)
        reply = session.handle_line('{"cmd": "reset", "seed": 7}')
        assert reply["protocol"] == 1
        assert len(reply["obs"]["nodes"]) == 36
        assert reply["mask"][0] is True

        step = session.handle_line('{"cmd": "step", "action": 1}')
        assert set(step) == {"obs", "reward", "done", "info"}
        assert step["info"]["nodes_deployed"] == 1

    def test_step_before_reset(self, single_donor_toy):
        session = EnvSession(single_donor_toy)
        assert session.handle_line('{"cmd": "step", "action": 1}') == {
            "error": "no_episode"
        }

    def test_malformed_line_keeps_session_alive(self, single_donor_toy):
        session = EnvSession(single_donor_toy)
        assert session.handle_line("{nope")["error"] == "malformed"
        assert session.handle_line('{"cmd": "reset"}')["protocol"] == 1

    def test_illegal_action_reply_carries_mask(self, single_donor_toy):
        session = EnvSession(single_donor_toy)
        session.handle_line('{"cmd": "reset"}')
        session.handle_line('{"cmd": "step", "action": 1}')
        reply = session.handle_line('{"cmd": "step", "action": 1}')
        assert reply["error"] == "illegal_action"
        assert reply["mask"][1] is False

    def test_unknown_command(self, single_donor_toy):
        session = EnvSession(single_donor_toy)
        assert session.handle_line('{"cmd": "dance"}')["error"] == "unknown_command"

    def test_sequential_episodes(self, single_donor_toy):
        session = EnvSession(single_donor_toy)
        first = session.handle_line('{"cmd": "reset", "seed": 1}')
        session.handle_line('{"cmd": "step", "action": 3}')
        second = session.handle_line('{"cmd": "reset", "seed": 1}')
        assert json.dumps(first) == json.dumps(second)

    def test_close(self, single_donor_toy):
        session = EnvSession(single_donor_toy)
        assert session.handle_line('{"cmd": "close"}') == {"closed": True}
        assert session.closed


class TestTransports:
    def test_stream_transport(self, single_donor_toy):
        lines = [
            '{"cmd": "reset", "seed": 0}',
            '{"cmd": "step", "action": 2}',
            '{"cmd": "close"}',
        ]
        reader = io.StringIO("\n".join(lines) + "\n")
        writer = io.StringIO()
        serve_stream(single_donor_toy, reader, writer)
        replies = [json.loads(line) for line in writer.getvalue().splitlines()]
        assert len(replies) == 3
        assert replies[0]["protocol"] == 1
        assert "reward" in replies[1]
        assert replies[2] == {"closed": True}

    def test_tcp_transport(self, single_donor_toy):
        ready = threading.Event()
        address = {}

        def on_ready(addr):
            address["addr"] = addr
            ready.set()

        thread = threading.Thread(
            target=serve_tcp,
            args=(single_donor_toy, "127.0.0.1", 0),
            kwargs={"ready_callback": on_ready},
            daemon=True,
        )
        thread.start()
        assert ready.wait(5)

        with socket.create_connection(address["addr"], timeout=5) as sock:
            f = sock.makefile("rw", encoding="utf-8")
            f.write('{"cmd": "reset", "seed": 3}\n')
            f.flush()
            reply = json.loads(f.readline())
            assert reply["protocol"] == 1
            f.write('{"cmd": "step", "action": 0}\n')
            f.flush()
            step = json.loads(f.readline())
            assert step["done"] is True
            f.write('{"cmd": "close"}\n')
            f.flush()
            assert json.loads(f.readline()) == {"closed": True}


def test_encode_reply_ends_with_newline():
    assert encode_reply({"a": 1}).endswith("\n")
