"""Training loop: collect whole episodes, update on-policy, checkpoint.

Each episode resets the environment, rolls the policy until done, and
stores the trajectory; every few episodes the buffer feeds one clipped
update and is cleared. A one-line CSV record per episode lands in the
checkpoint directory alongside periodic checkpoints.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import asdict
from pathlib import Path

import torch

from .client import EnvClient, ProtocolError
from .config import PolicyConfig
from .model import DeploymentPolicy
from .ppo import Trajectory, Transition, ppo_update

CURVE_FIELDS = ("episode", "return", "coverage", "nodes")


def collect_episode(client: EnvClient, policy: DeploymentPolicy, seed: int) -> tuple[Trajectory, dict]:
    """Roll one episode; returns the trajectory and the final info dict."""
    obs = client.reset(seed)
    trajectory = Trajectory()
    info: dict = {}
    done = False
    while not done:
        action, log_prob, value = policy.act(obs)
        next_obs, reward, done, info = client.step(action)
        trajectory.append(
            Transition(
                obs=obs,
                action=action,
                log_prob=log_prob,
                value=value,
                reward=reward,
                done=done,
            )
        )
        obs = next_obs
    return trajectory, info


def evaluate_policy(client: EnvClient, policy: DeploymentPolicy, seed: int = 0) -> dict:
    """Greedy (argmax) rollout; returns final info plus episode return."""
    obs = client.reset(seed)
    total = 0.0
    done = False
    info: dict = {}
    while not done:
        action, _, _ = policy.act(obs, deterministic=True)
        obs, reward, done, info = client.step(action)
        total += reward
    return {**info, "return": total}


def save_checkpoint(policy: DeploymentPolicy, path: str | Path) -> None:
    torch.save(
        {"model": policy.state_dict(), "config": asdict(policy.config)}, str(path)
    )


def load_checkpoint(path: str | Path) -> DeploymentPolicy:
    blob = torch.load(str(path), weights_only=True)
    policy = DeploymentPolicy(PolicyConfig(**blob["config"]))
    policy.load_state_dict(blob["model"])
    policy.eval()
    return policy


def train(
    client: EnvClient,
    config: PolicyConfig,
    seed: int,
    checkpoint_dir: str | Path,
    episodes: int | None = None,
    checkpoint_every: int = 200,
    log_every: int = 50,
) -> tuple[DeploymentPolicy, list[dict]]:
    """Run the training loop; returns the policy and the episode curve."""
    torch.manual_seed(seed)
    episodes = episodes if episodes is not None else config.episodes
    checkpoint_dir = Path(checkpoint_dir)
    checkpoint_dir.mkdir(parents=True, exist_ok=True)

    policy = DeploymentPolicy(config)
    optimizer = torch.optim.Adam(policy.parameters(), lr=config.learning_rate)

    curve: list[dict] = []
    buffer: list[Trajectory] = []
    curve_path = checkpoint_dir / "curve.csv"
    with curve_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CURVE_FIELDS)

        for episode in range(episodes):
            try:
                trajectory, info = collect_episode(client, policy, seed=episode)
            except ProtocolError:
                trajectory, info = collect_episode(client, policy, seed=episode)
            buffer.append(trajectory)
            record = {
                "episode": episode,
                "return": trajectory.total_reward,
                "coverage": info.get("coverage_fraction", 0.0),
                "nodes": info.get("nodes_deployed", 0),
            }
            curve.append(record)
            writer.writerow([record[f] for f in CURVE_FIELDS])

            if len(buffer) >= config.update_every_episodes:
                ppo_update(policy, optimizer, buffer, config)
                buffer = []
            if (episode + 1) % checkpoint_every == 0:
                save_checkpoint(policy, checkpoint_dir / f"checkpoint_{episode + 1}.pt")
            if (episode + 1) % log_every == 0:
                recent = curve[-log_every:]
                mean_return = sum(r["return"] for r in recent) / len(recent)
                print(
                    f"episode {episode + 1}: mean return {mean_return:.2f}, "
                    f"last nodes {record['nodes']}, coverage {record['coverage']:.3f}",
                    flush=True,
                )

    save_checkpoint(policy, checkpoint_dir / "checkpoint_final.pt")
    return policy, curve


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="iabagent-train",
        description="Train the graph-attention deployment policy.",
    )
    parser.add_argument("scenario", help="scenario file for the spawned environment")
    parser.add_argument("--episodes", type=int, default=None)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--checkpoint-dir", default="checkpoints")
    parser.add_argument("--tcp", metavar="HOST:PORT",
                        help="connect to a running service instead of spawning one")
    args = parser.parse_args(argv)

    config = PolicyConfig()
    if args.tcp:
        host, port = args.tcp.rsplit(":", 1)
        client = EnvClient.connect_tcp(host, int(port))
    else:
        client = EnvClient.spawn_stdio(args.scenario)
    with client:
        _, curve = train(
            client,
            config,
            seed=args.seed,
            checkpoint_dir=args.checkpoint_dir,
            episodes=args.episodes,
        )
    last = curve[-1]
    print(
        f"finished {len(curve)} episodes; final coverage {last['coverage']:.3f} "
        f"with {last['nodes']} nodes"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
