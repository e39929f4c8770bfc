"""Edge-conditioned graph-attention policy and value networks.

The encoder follows the v2 attention ordering: the shared linear map is
applied to the concatenated destination/source/edge features *before* the
nonlinearity, and the attention vector scores the activated result.
Attention normalizes over each node's inbound neighbors including a
self-loop (whose edge features are zero). Heads are concatenated.

The actor is a pointer head: one logit per candidate node from its
embedding, plus a stop-action logit from the pooled graph embedding.
The critic mean-pools node embeddings into a scalar value.
"""

from __future__ import annotations

import torch
from torch import nn

from .config import PolicyConfig
from .graphs import GraphObs


def segment_softmax(scores: torch.Tensor, index: torch.Tensor, n_segments: int) -> torch.Tensor:
    """Softmax of ``scores`` (E, H) grouped by ``index`` (E,) entries."""
    n_heads = scores.shape[1]
    maxes = scores.new_full((n_segments, n_heads), float("-inf"))
    maxes = maxes.scatter_reduce(
        0, index.unsqueeze(-1).expand_as(scores), scores, reduce="amax", include_self=True
    )
    shifted = (scores - maxes[index].detach()).exp()
    denom = scores.new_zeros((n_segments, n_heads)).index_add_(0, index, shifted)
    return shifted / denom[index]


class EdgeGATv2Layer(nn.Module):
    """One multi-head attention layer conditioned on edge features."""

    def __init__(self, in_dim: int, edge_dim: int, out_dim: int, heads: int):
        super().__init__()
        if out_dim % heads != 0:
            raise ValueError("out_dim must be divisible by heads")
        self.heads = heads
        self.head_dim = out_dim // heads
        self.edge_dim = edge_dim
        self.attn_proj = nn.Linear(2 * in_dim + edge_dim, heads * self.head_dim)
        self.attn_vector = nn.Parameter(torch.empty(heads, self.head_dim))
        self.value_proj = nn.Linear(in_dim + edge_dim, heads * self.head_dim)
        self.activation = nn.LeakyReLU(0.2)
        nn.init.xavier_uniform_(self.attn_vector)

    def forward(
        self,
        x: torch.Tensor,
        edge_index: torch.Tensor,
        edge_feats: torch.Tensor,
        return_attention: bool = False,
    ):
        n_nodes = x.shape[0]
        loop = torch.arange(n_nodes, device=x.device)
        src = torch.cat([edge_index[0], loop])
        dst = torch.cat([edge_index[1], loop])
        feats = torch.cat(
            [edge_feats, edge_feats.new_zeros((n_nodes, self.edge_dim))]
        )

        cat_attn = torch.cat([x[dst], x[src], feats], dim=1)
        scored = self.activation(self.attn_proj(cat_attn))
        scored = scored.view(-1, self.heads, self.head_dim)
        logits = (scored * self.attn_vector).sum(-1)  # (E', H)
        alpha = segment_softmax(logits, dst, n_nodes)

        values = self.value_proj(torch.cat([x[src], feats], dim=1))
        values = values.view(-1, self.heads, self.head_dim)
        weighted = alpha.unsqueeze(-1) * values
        out = x.new_zeros((n_nodes, self.heads, self.head_dim))
        out.index_add_(0, dst, weighted)
        out = out.reshape(n_nodes, self.heads * self.head_dim)
        if return_attention:
            return out, (alpha, dst)
        return out


class DeploymentPolicy(nn.Module):
    """Shared encoder with pointer-actor and critic heads."""

    def __init__(self, config: PolicyConfig | None = None):
        super().__init__()
        self.config = config or PolicyConfig()
        self.config.validate()
        cfg = self.config

        in_dim = cfg.node_dim + cfg.global_dim
        self.encoder = nn.ModuleList()
        for layer in range(cfg.layers):
            self.encoder.append(
                EdgeGATv2Layer(
                    in_dim if layer == 0 else cfg.hidden,
                    cfg.edge_dim,
                    cfg.hidden,
                    cfg.heads,
                )
            )
        self.between = nn.ELU()
        self.pointer_head = nn.Sequential(
            nn.Linear(cfg.hidden, cfg.hidden), nn.Tanh(), nn.Linear(cfg.hidden, 1)
        )
        self.stop_head = nn.Sequential(
            nn.Linear(cfg.hidden, cfg.hidden), nn.Tanh(), nn.Linear(cfg.hidden, 1)
        )
        self.value_head = nn.Sequential(
            nn.Linear(cfg.hidden, cfg.hidden), nn.Tanh(), nn.Linear(cfg.hidden, 1)
        )
        # Running return statistics: the head predicts standardized returns,
        # keeping the value loss O(1) so it cannot drown the policy gradient
        # through the shared encoder when episode returns are large.
        self.register_buffer("return_mean", torch.zeros(()))
        self.register_buffer("return_std", torch.ones(()))
        self.register_buffer("return_stats_ready", torch.zeros((), dtype=torch.bool))

    def update_return_stats(self, returns: torch.Tensor, momentum: float = 0.9) -> None:
        """Fold one batch of empirical returns into the running scale."""
        mean = returns.mean().to(self.return_mean.dtype)
        std = returns.std(unbiased=False).clamp_min(1e-6).to(self.return_std.dtype)
        if bool(self.return_stats_ready):
            self.return_mean.mul_(momentum).add_((1 - momentum) * mean)
            self.return_std.mul_(momentum).add_((1 - momentum) * std)
        else:
            self.return_mean.copy_(mean)
            self.return_std.copy_(std)
            self.return_stats_ready.fill_(True)

    def _denormalize(self, standardized: torch.Tensor) -> torch.Tensor:
        return standardized * self.return_std + self.return_mean

    def encode(self, obs: GraphObs, return_attention: bool = False):
        """Node embeddings (V, hidden); global features joined to each node."""
        glob = obs.global_feats.to(obs.node_feats.dtype)
        x = torch.cat(
            [obs.node_feats, glob.unsqueeze(0).expand(obs.n_nodes, -1)], dim=1
        )
        attention = []
        for i, layer in enumerate(self.encoder):
            if return_attention:
                x, attn = layer(x, obs.edge_index, obs.edge_feats, return_attention=True)
                attention.append(attn)
            else:
                x = layer(x, obs.edge_index, obs.edge_feats)
            if i + 1 < len(self.encoder):
                x = self.between(x)
        if return_attention:
            return x, attention
        return x

    def action_logits(self, obs: GraphObs, embeddings: torch.Tensor) -> torch.Tensor:
        """Masked logits over {stop} + candidates; masked entries are -inf."""
        if not bool(obs.mask.any()):
            raise ValueError("action mask is empty: no legal action exists")
        logits = embeddings.new_full((len(obs.mask),), float("-inf"))
        logits[0] = self.stop_head(embeddings.mean(dim=0)).squeeze(-1)
        actions = sorted(obs.action_rows)
        rows = torch.tensor([obs.action_rows[a] for a in actions], dtype=torch.long)
        scores = self.pointer_head(embeddings[rows]).squeeze(-1)
        logits[torch.tensor(actions, dtype=torch.long)] = scores
        return logits.masked_fill(~obs.mask, float("-inf"))

    def action_distribution(self, obs: GraphObs) -> torch.distributions.Categorical:
        embeddings = self.encode(obs)
        return torch.distributions.Categorical(logits=self.action_logits(obs, embeddings))

    def value(self, obs: GraphObs) -> torch.Tensor:
        if obs.n_nodes == 0:
            raise ValueError("cannot value an empty graph")
        embeddings = self.encode(obs)
        return self._denormalize(self.value_head(embeddings.mean(dim=0)).squeeze(-1))

    def evaluate_action(self, obs: GraphObs, action: int):
        """(log-prob, value, entropy) for one stored transition."""
        embeddings = self.encode(obs)
        dist = torch.distributions.Categorical(
            logits=self.action_logits(obs, embeddings)
        )
        value = self._denormalize(self.value_head(embeddings.mean(dim=0)).squeeze(-1))
        action_t = torch.tensor(action, dtype=torch.long)
        return dist.log_prob(action_t), value, dist.entropy()

    @torch.no_grad()
    def act(self, obs: GraphObs, deterministic: bool = False):
        """Sample (or argmax) an action; returns (action, log_prob, value)."""
        embeddings = self.encode(obs)
        dist = torch.distributions.Categorical(
            logits=self.action_logits(obs, embeddings)
        )
        if deterministic:
            action = dist.probs.argmax()
        else:
            action = dist.sample()
        value = self._denormalize(self.value_head(embeddings.mean(dim=0)).squeeze(-1))
        return int(action), float(dist.log_prob(action)), float(value)
