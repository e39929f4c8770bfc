import torch
import pytest

from iabagent.config import PolicyConfig
from iabagent.graphs import GraphObs


def build_obs(
    n_nodes: int,
    edges: list[tuple[int, int]],
    seed: int = 0,
    dtype: torch.dtype = torch.float32,
    n_donors: int = 1,
) -> GraphObs:
    """Synthetic observation: last ``n_donors`` nodes are donors."""
    gen = torch.Generator().manual_seed(seed)
    n_candidates = n_nodes - n_donors
    node_feats = torch.rand((n_nodes, 4), generator=gen, dtype=dtype)
    node_feats[:, 3] = 0.0
    node_feats[n_candidates:, 3] = 1.0
    if edges:
        edge_index = torch.tensor([[e[0] for e in edges], [e[1] for e in edges]])
        edge_feats = torch.rand((len(edges), 3), generator=gen, dtype=dtype)
    else:
        edge_index = torch.zeros((2, 0), dtype=torch.long)
        edge_feats = torch.zeros((0, 3), dtype=dtype)
    mask = torch.ones(n_candidates + 1, dtype=torch.bool)
    return GraphObs(
        node_ids=list(range(1, n_nodes + 1)),
        node_feats=node_feats,
        edge_index=edge_index,
        edge_feats=edge_feats,
        global_feats=torch.tensor([0.98, 2.0, 0.2, 1.2], dtype=dtype),
        mask=mask,
        action_rows={a: a - 1 for a in range(1, n_candidates + 1)},
    )


@pytest.fixture()
def three_node_obs():
    """The standard 3-node fixture: two candidates and one donor."""
    return build_obs(3, [(2, 0), (2, 1), (0, 1)], seed=7, dtype=torch.float64)


@pytest.fixture()
def small_config():
    return PolicyConfig(hidden=16, heads=2)
