"""On-policy rollout storage, advantage estimation, and the clipped update.

Rollouts are whole episodes; the buffer is cleared after every update, so
the probability-ratio surrogate always compares against the policy that
generated the data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch

from .config import PolicyConfig
from .graphs import GraphObs
from .model import DeploymentPolicy


@dataclass
class Transition:
    obs: GraphObs
    action: int
    log_prob: float
    value: float
    reward: float
    done: bool


@dataclass
class Trajectory:
    """One episode plus its advantage/return annotations."""

    steps: list[Transition] = field(default_factory=list)
    advantages: list[float] = field(default_factory=list)
    returns: list[float] = field(default_factory=list)

    def append(self, transition: Transition) -> None:
        self.steps.append(transition)

    @property
    def total_reward(self) -> float:
        return sum(t.reward for t in self.steps)

    def compute_gae(self, gamma: float, lam: float) -> None:
        """Generalized advantage estimation; terminal bootstrap is zero."""
        advantages = []
        gae = 0.0
        next_value = 0.0
        for t in reversed(self.steps):
            if t.done:
                next_value = 0.0
                gae = 0.0
            delta = t.reward + gamma * next_value - t.value
            gae = delta + gamma * lam * gae
            advantages.append(gae)
            next_value = t.value
        advantages.reverse()
        self.advantages = advantages
        self.returns = [a + t.value for a, t in zip(advantages, self.steps)]
        if not all(math.isfinite(a) for a in advantages):
            raise RuntimeError(f"non-finite advantages: {advantages}")


def ppo_loss(
    policy: DeploymentPolicy,
    observations: list[GraphObs],
    actions: torch.Tensor,
    old_log_probs: torch.Tensor,
    advantages: torch.Tensor,
    returns: torch.Tensor,
    config: PolicyConfig,
):
    """Clipped surrogate + value MSE - entropy bonus over one minibatch.

    Returns (loss, metrics dict of detached floats).
    """
    new_log_probs = []
    values = []
    entropies = []
    for obs, action in zip(observations, actions):
        log_prob, value, entropy = policy.evaluate_action(obs, int(action))
        new_log_probs.append(log_prob)
        values.append(value)
        entropies.append(entropy)
    new_log_probs = torch.stack(new_log_probs)
    values = torch.stack(values)
    entropies = torch.stack(entropies)

    ratio = (new_log_probs - old_log_probs).exp()
    clipped = ratio.clamp(1.0 - config.clip, 1.0 + config.clip)
    policy_loss = -torch.min(ratio * advantages, clipped * advantages).mean()
    # Squared error in standardized return units (see update_return_stats),
    # so the value term stays comparable to the surrogate.
    scale = policy.return_std.detach().clamp_min(1e-6)
    value_loss = ((values - returns) / scale).pow(2).mean()
    entropy_bonus = entropies.mean()
    loss = (
        policy_loss
        + config.value_coeff * value_loss
        - config.entropy_coeff * entropy_bonus
    )

    with torch.no_grad():
        metrics = {
            "loss": float(loss),
            "policy_loss": float(policy_loss),
            "value_loss": float(value_loss),
            "entropy": float(entropy_bonus),
            "approx_kl": float((old_log_probs - new_log_probs).mean()),
            "clip_fraction": float(
                ((ratio - 1.0).abs() > config.clip).float().mean()
            ),
            "mean_ratio": float(ratio.mean()),
        }
    return loss, metrics


def flatten_trajectories(trajectories: list[Trajectory], config: PolicyConfig):
    """GAE per trajectory, then one flat normalized batch."""
    for traj in trajectories:
        if not traj.steps:
            raise ValueError("cannot update from an empty trajectory")
        traj.compute_gae(config.gamma, config.gae_lambda)

    observations = [t.obs for traj in trajectories for t in traj.steps]
    actions = torch.tensor(
        [t.action for traj in trajectories for t in traj.steps], dtype=torch.long
    )
    # float64 keeps stored log-probs exact so untouched policies give
    # probability ratios of exactly one.
    old_log_probs = torch.tensor(
        [t.log_prob for traj in trajectories for t in traj.steps],
        dtype=torch.float64,
    )
    advantages = torch.tensor(
        [a for traj in trajectories for a in traj.advantages], dtype=torch.float64
    )
    returns = torch.tensor(
        [r for traj in trajectories for r in traj.returns], dtype=torch.float64
    )
    if len(advantages) > 1:
        advantages = (advantages - advantages.mean()) / (advantages.std() + 1e-8)
    return observations, actions, old_log_probs, advantages, returns


def ppo_update(
    policy: DeploymentPolicy,
    optimizer: torch.optim.Optimizer,
    trajectories: list[Trajectory],
    config: PolicyConfig,
) -> dict:
    """Several epochs of minibatch updates over the collected episodes."""
    observations, actions, old_log_probs, advantages, returns = flatten_trajectories(
        trajectories, config
    )
    policy.update_return_stats(returns)
    n = len(observations)
    last_metrics: dict = {}
    for _ in range(config.ppo_epochs):
        order = torch.randperm(n)
        for start in range(0, n, config.batch):
            idx = order[start : start + config.batch]
            loss, metrics = ppo_loss(
                policy,
                [observations[i] for i in idx],
                actions[idx],
                old_log_probs[idx],
                advantages[idx],
                returns[idx],
                config,
            )
            if not math.isfinite(metrics["loss"]):
                raise RuntimeError(f"non-finite loss during update: {metrics}")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            last_metrics = metrics
    return last_metrics
