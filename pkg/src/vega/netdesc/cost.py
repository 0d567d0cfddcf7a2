"""Analytic parameter and FLOP counts for model descriptions.

Convolution weights are ``k * k * c_in * c_out / groups``; a separable
convolution adds a depthwise ``k * k * c_in`` to a pointwise ``c_in * c_out``.
FLOPs count each multiply-accumulate as two operations by default and are
taken per output pixel (``resolution ** 2``).  BatchNorm carries ``2c``
parameters and ``2c`` FLOPs per pixel; activations, merges, pooling and
identities are treated as free.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import ModelNode, iter_nodes

__all__ = ["CostEstimate", "estimate_cost", "operator_cost", "FREE_OPERATORS"]

FREE_OPERATORS = frozenset(
    {
        "relu", "add", "concat", "identity", "none", "skip_connect",
        "max_pool_3x3", "avg_pool_3x3", "maxpool", "avgpool", "dropout", "flatten",
    }
)


@dataclass(frozen=True)
class CostEstimate:
    params_millions: float = 0.0
    flops_billions: float = 0.0

    def __add__(self, other: "CostEstimate") -> "CostEstimate":
        return CostEstimate(
            self.params_millions + other.params_millions,
            self.flops_billions + other.flops_billions,
        )


def _resolution(attrs: dict, inherited: int) -> int:
    return int(attrs.get("resolution", inherited))


def operator_cost(node: ModelNode, resolution: int, flops_per_mac: int = 2) -> tuple[float, float]:
    """(params, flops) of a single operator, as raw counts."""
    a = node.attrs
    kind = str(a.get("type", "")).lower()
    pixels = resolution * resolution
    if kind.startswith("conv") or kind.startswith("sep_conv") or kind.startswith("dil_conv"):
        k = int(a.get("kernel_size", 3))
        cin, cout = int(a["in_channels"]), int(a["out_channels"])
        if a.get("separable") or kind.startswith("sep_conv"):
            weights = k * k * cin + cin * cout
        else:
            weights = k * k * cin * cout / int(a.get("groups", 1))
        if a.get("bias"):
            weights += cout
        return float(weights), float(flops_per_mac * weights * pixels)
    if kind in ("batchnorm", "bn", "batchnorm2d"):
        c = int(a.get("out_channels", a.get("in_channels", 0)))
        return 2.0 * c, 2.0 * c * pixels
    if kind in ("linear", "dense"):
        cin, cout = int(a["in_channels"]), int(a["out_channels"])
        return float(cin * cout + cout), float(flops_per_mac * cin * cout)
    if kind in FREE_OPERATORS:
        return 0.0, 0.0
    raise ValueError(f"unknown operator kind {a.get('type')!r} at {node.name!r}")


def estimate_cost(desc: ModelNode, flops_per_mac: int = 2, resolution: int = 1) -> CostEstimate:
    """Sum operator costs over the tree.

    ``resolution`` is the default output size for operators that neither carry
    nor inherit a ``resolution`` attribute.
    """
    params = flops = 0.0

    def walk(node: ModelNode, res: int) -> None:
        nonlocal params, flops
        res = _resolution(node.attrs, res)
        if node.kind == "operator":
            p, f = operator_cost(node, res, flops_per_mac)
            params += p
            flops += f
        for c in node.children:
            walk(c, res)

    walk(desc, resolution)
    return CostEstimate(params / 1e6, flops / 1e9)


def count_operators(desc: ModelNode) -> int:
    return sum(1 for _, n in iter_nodes(desc) if n.kind == "operator")
