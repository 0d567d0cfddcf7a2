"""A fine-grained ResNet-style description used by the channel/stride search examples."""

from __future__ import annotations

from .model import ModelNode


def resnet_description(
    name: str = "resnet",
    cells: int = 8,
    inchannels: int = 64,
    resolution: int = 32,
    num_classes: int = 10,
) -> ModelNode:
    """``cells`` basic cells, each holding one 3x3 convolution.

    Every cell exposes ``inchannels``, ``outchannels`` and ``strides`` so that
    ``<name>.cell.<attr>`` fans out over all cells and ``<name>.convs.<attr>``
    over all convolutions.
    """
    body = []
    for i in range(cells):
        conv = ModelNode(
            "conv",
            "operator",
            {"type": "Conv2d", "kernel_size": 3, "groups": 1, "in_channels": inchannels,
             "out_channels": inchannels, "inchannels": inchannels, "outchannels": inchannels},
        )
        bn = ModelNode("bn", "operator", {"type": "BatchNorm", "in_channels": inchannels, "out_channels": inchannels})
        relu = ModelNode("relu", "operator", {"type": "ReLU"})
        body.append(
            ModelNode(f"cell{i}", "cell", {"inchannels": inchannels, "outchannels": inchannels, "strides": 1},
                      [ModelNode("block", "block", {"type": "BasicBlock"}, [conv, bn, relu])])
        )
    return ModelNode(name, "network", {"in_channels": 3, "resolution": resolution, "num_classes": num_classes}, body)
