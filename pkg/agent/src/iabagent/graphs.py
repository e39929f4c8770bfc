"""Wire observations parsed into tensors the policy consumes."""

from __future__ import annotations

from dataclasses import dataclass

import torch


@dataclass
class GraphObs:
    """One observation: node/edge tensors plus the action mask.

    ``node_ids`` preserves the wire ordering; ``edge_index`` holds row
    positions (not ids). ``mask[0]`` is the stop action and ``mask[j]``
    candidate id j; ``action_rows[a]`` maps action a >= 1 to its node row.
    """

    node_ids: list[int]
    node_feats: torch.Tensor  # (V, 4)
    edge_index: torch.Tensor  # (2, E) long, [src_row, dst_row]
    edge_feats: torch.Tensor  # (E, 3)
    global_feats: torch.Tensor  # (4,)
    mask: torch.Tensor  # (A,) bool
    action_rows: dict[int, int]

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)


def parse_observation(obs: dict, dtype: torch.dtype = torch.float32) -> GraphObs:
    """Build tensors from one wire observation object."""
    nodes = obs["nodes"]
    node_ids = [n["id"] for n in nodes]
    row_of = {node_id: row for row, node_id in enumerate(node_ids)}

    node_feats = torch.tensor(
        [[n["alpha"], n["demand"], n["resil_ratio"], n["is_donor"]] for n in nodes],
        dtype=dtype,
    )
    edges = obs["edges"]
    if edges:
        edge_index = torch.tensor(
            [[row_of[e["src"]] for e in edges], [row_of[e["dst"]] for e in edges]],
            dtype=torch.long,
        )
        edge_feats = torch.tensor(
            [[e["cap"], e["util"], e["feas"]] for e in edges], dtype=dtype
        )
    else:
        edge_index = torch.zeros((2, 0), dtype=torch.long)
        edge_feats = torch.zeros((0, 3), dtype=dtype)

    mask = torch.tensor(obs["mask"], dtype=torch.bool)
    action_rows = {a: row_of[a] for a in range(1, len(mask)) if a in row_of}

    return GraphObs(
        node_ids=node_ids,
        node_feats=node_feats,
        edge_index=edge_index,
        edge_feats=edge_feats,
        global_feats=torch.tensor(obs["global"], dtype=dtype),
        mask=mask,
        action_rows=action_rows,
    )
