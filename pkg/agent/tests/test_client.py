"""Client tests against a real spawned environment service."""

import json
import subprocess
import sys
from pathlib import Path

import pytest
import torch

from iabagent.client import EnvClient, ProtocolError
from iabagent.config import PolicyConfig
from iabagent.model import DeploymentPolicy
from iabagent.train import (
    collect_episode,
    evaluate_policy,
    load_checkpoint,
    save_checkpoint,
)


@pytest.fixture(scope="module")
def toy_scenario_path(tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("scenario") / "toy.json"
    subprocess.run(
        [sys.executable, "-m", "iabplan.cli", "scenario", "single", "-o", str(path),
         "--area", "300", "300", "--spacing", "50", "--theta-cov", "0.9"],
        check=True,
        capture_output=True,
    )
    return path


class TestEnvClient:
    def test_reset_shape(self, toy_scenario_path):
        with EnvClient.spawn_stdio(toy_scenario_path) as client:
            obs = client.reset(3)
            assert obs.n_nodes == 36
            assert len(obs.mask) == 36
            assert obs.mask.all()
            assert obs.global_feats.tolist() == pytest.approx([0.9, 2.0, 0.2, 1.2])

    def test_step_and_done_flow(self, toy_scenario_path):
        with EnvClient.spawn_stdio(toy_scenario_path) as client:
            client.reset(0)
            obs, reward, done, info = client.step(1)
            assert info["nodes_deployed"] == 1
            assert not obs.mask[1]
            obs, reward, done, info = client.step(0)
            assert done

    def test_illegal_action_raises_protocol_error(self, toy_scenario_path):
        with EnvClient.spawn_stdio(toy_scenario_path) as client:
            client.reset(0)
            client.step(1)
            with pytest.raises(ProtocolError):
                client.step(1)

    def test_collect_episode_consistency(self, toy_scenario_path):
        torch.manual_seed(0)
        policy = DeploymentPolicy(PolicyConfig(hidden=16, heads=2))
        with EnvClient.spawn_stdio(toy_scenario_path) as client:
            trajectory, info = collect_episode(client, policy, seed=1)
        assert trajectory.steps
        assert trajectory.steps[-1].done
        assert all(not t.done for t in trajectory.steps[:-1])
        assert info["coverage_fraction"] >= 0.0

    def test_evaluate_policy_terminates(self, toy_scenario_path):
        torch.manual_seed(1)
        policy = DeploymentPolicy(PolicyConfig(hidden=16, heads=2))
        with EnvClient.spawn_stdio(toy_scenario_path) as client:
            stats = evaluate_policy(client, policy, seed=0)
        assert "return" in stats and "nodes_deployed" in stats


class TestCheckpoints:
    def test_reload_preserves_action_distribution(self, tmp_path, toy_scenario_path):
        torch.manual_seed(2)
        policy = DeploymentPolicy(PolicyConfig(hidden=16, heads=2))
        policy.update_return_stats(torch.tensor([150.0, 250.0]))
        with EnvClient.spawn_stdio(toy_scenario_path) as client:
            obs = client.reset(0)
        path = tmp_path / "ckpt.pt"
        save_checkpoint(policy, path)
        reloaded = load_checkpoint(path)
        with torch.no_grad():
            a = policy.action_distribution(obs).probs
            b = reloaded.action_distribution(obs).probs
            assert torch.equal(a, b)
            # Return-scale buffers ride along in the checkpoint.
            assert torch.equal(policy.value(obs), reloaded.value(obs))
