"""Training configuration."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass
class PolicyConfig:
    """Hyperparameters for the encoder, heads, and PPO optimizer.

    Defaults are the standard recipe for this environment: 2 attention
    layers of 64 hidden units with 8 heads, learning rate 3e-4, clip 0.2,
    discount 0.99, minibatch 32.
    """

    layers: int = 2
    hidden: int = 64
    heads: int = 8
    node_dim: int = 4
    edge_dim: int = 3
    global_dim: int = 4
    learning_rate: float = 3e-4
    batch: int = 32
    gamma: float = 0.99
    clip: float = 0.2
    episodes: int = 8000
    gae_lambda: float = 0.95
    entropy_coeff: float = 0.01
    value_coeff: float = 0.5
    ppo_epochs: int = 4
    update_every_episodes: int = 4

    def validate(self) -> None:
        positive = {
            "layers": self.layers,
            "hidden": self.hidden,
            "heads": self.heads,
            "learning_rate": self.learning_rate,
            "batch": self.batch,
            "episodes": self.episodes,
            "gae_lambda": self.gae_lambda,
            "entropy_coeff": self.entropy_coeff,
        }
        for name, value in positive.items():
            if value <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.clip < 1:
            raise ValueError("clip must be in (0, 1)")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must be in (0, 1]")
        if self.hidden % self.heads != 0:
            raise ValueError("hidden must be divisible by heads")
