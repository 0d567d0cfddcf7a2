"""Explore the DNet block grammar: parse a code, render it, cost it, count the universe.

Run:  python3 demos/03_dnet_blocks.py
"""

from vega.netdesc import (
    DnetBlockSpec,
    count_dnet_blocks,
    dnet_network,
    enumerate_dnet_blocks,
    estimate_cost,
    render_dnet_block,
    validate_dnet_block,
)


def show(block):
    for op in block.children:
        a = op.attrs
        print(f"    {op.name:<13} {a['type']:<13} <- {', '.join(a['inputs']):<19} {a['out_channels']:>3} ch")


def main():
    spec = DnetBlockSpec.from_code("S3:2-5-1_R:1_K:(0,3)A")
    print(f"{spec.code}: {len(spec.stem_ops)} stem ops, one extra skip from the input to node 3")
    block = render_dnet_block(spec, 64)
    show(block)
    # The skip carries 64 channels into an Add whose stem side carries 32,
    # so the renderer inserts exactly one 1x1 adapter on that skip.

    for bad in ("S2:0-0_R:0_K:(1,3)C", "S3:0-0-0_R:0_K:(1,2)A"):
        print(f"{bad}: {validate_dnet_block(DnetBlockSpec.from_code(bad))}")

    net = dnet_network(spec, channels=32, repeats=2)
    cost = estimate_cost(net)
    print(f"network of 2 blocks at 32 ch: {cost.params_millions * 1e3:.1f}k params, "
          f"{cost.flops_billions * 1e3:.1f} MFLOPs")

    small = list(enumerate_dnet_blocks(2, 1, 2))
    print(f"vocab 2, one ratio, at most 2 ops: {len(small)} blocks, e.g. {small[0].code} ... {small[-1].code}")
    print(f"default universe (7 ops, 5 ratios, at most 3 ops): {count_dnet_blocks()} blocks")


if __name__ == "__main__":
    main()
