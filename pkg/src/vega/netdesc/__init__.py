"""Fine-grained model descriptions: name-bound trees, supernets, DNet blocks, cost."""

from .cost import CostEstimate, estimate_cost
from .dnet import (
    DEFAULT_OPS,
    DEFAULT_RATIOS,
    DnetBlockSpec,
    count_dnet_blocks,
    dnet_network,
    enumerate_dnet_blocks,
    render_dnet_block,
    validate_dnet_block,
)
from .model import AttrRef, ModelNode, ResolveError, apply_sample, diff_leaves, resolve, validate_description
from .resnet import resnet_description
from .supernet import SupernetDescription, select_from_supernet, supernet_from_config

__all__ = [
    "AttrRef",
    "CostEstimate",
    "DEFAULT_OPS",
    "DEFAULT_RATIOS",
    "DnetBlockSpec",
    "ModelNode",
    "ResolveError",
    "SupernetDescription",
    "apply_sample",
    "count_dnet_blocks",
    "diff_leaves",
    "dnet_network",
    "enumerate_dnet_blocks",
    "estimate_cost",
    "render_dnet_block",
    "resnet_description",
    "resolve",
    "select_from_supernet",
    "supernet_from_config",
    "validate_description",
    "validate_dnet_block",
]
