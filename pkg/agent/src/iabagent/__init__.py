"""Graph-attention PPO agent for the IAB deployment environment."""

from .config import PolicyConfig
from .model import DeploymentPolicy

__all__ = ["PolicyConfig", "DeploymentPolicy"]

__version__ = "0.1.0"
