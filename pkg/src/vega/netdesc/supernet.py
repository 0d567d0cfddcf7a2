"""Parameter-sharing supernets: pick concrete operators from one-hot weights."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from .model import ModelNode, sample_values

__all__ = ["SupernetDescription", "select_from_supernet", "supernet_from_config"]

DARTS_GENOTYPE = (
    "none", "max_pool_3x3", "avg_pool_3x3", "skip_connect",
    "sep_conv_3x3", "sep_conv_5x5", "dil_conv_3x3", "dil_conv_5x5",
)


@dataclass(frozen=True)
class SupernetDescription:
    """Candidate operators plus ``count`` binary matrices, one per cell node.

    Row ``r`` of matrix ``i`` is one-hot over candidate columns and picks the
    operator on input edge ``r`` of node ``i``.
    """

    genotype: tuple[str, ...]
    concat: tuple[int, ...]
    weights: tuple = ()
    name: str = "supernet"
    attrs: Mapping[str, Any] = field(default_factory=dict)

    @property
    def count(self) -> int:
        return len(self.weights)


def _check_matrix(index: int, mat: Sequence[Sequence[int]], n_ops: int) -> list[int]:
    picks = []
    if not mat:
        raise ValueError(f"weight matrix {index} is empty")
    width = len(mat[0])
    if width > n_ops:
        raise ValueError(f"weight matrix {index} has {width} columns for {n_ops} candidate operators")
    for r, row in enumerate(mat):
        if len(row) != width or any(v not in (0, 1) for v in row) or sum(row) != 1:
            raise ValueError(f"weight matrix {index} row {r} is not one-hot: {list(row)!r}")
        picks.append(list(row).index(1))
    return picks


def select_from_supernet(sup: SupernetDescription) -> ModelNode:
    """Concrete cell: each node keeps the operator whose weight is 1 on every edge."""
    nodes = []
    all_none = True
    for i, mat in enumerate(sup.weights):
        edges = []
        for r, col in enumerate(_check_matrix(i, mat, len(sup.genotype))):
            op = sup.genotype[col]
            all_none = all_none and op == "none"
            edges.append(ModelNode(f"edge{r}", "operator", {"type": op, "input": r}))
        nodes.append(ModelNode(f"node{i}", "block", {"op_count": len(edges)}, edges))
    cell = ModelNode("cell", "cell", {"concat": list(sup.concat), "nodes": len(nodes)}, nodes)
    attrs = dict(sup.attrs)
    attrs["degenerate"] = all_none
    return ModelNode(sup.name, "network", attrs, [cell])


def supernet_from_config(name: str, model_block: Mapping[str, Any], sample: Mapping[str, Any]) -> SupernetDescription:
    """Build from a ``type: SupperNet`` model block and a sample holding ``<name>.weight.value``."""
    cells = model_block.get("cells", {})
    genotype = tuple(cells.get("genotype", DARTS_GENOTYPE))
    concat = tuple(cells.get("concat", ()))
    values = sample_values(sample)
    weights = values[f"{name}.weight.value"]
    count = values.get(f"{name}.weight.count", len(weights))
    return SupernetDescription(genotype, concat, tuple(weights[: int(count)]), name=name)
