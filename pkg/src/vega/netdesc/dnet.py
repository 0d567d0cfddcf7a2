"""DNet block grammar: validation, rendering, enumeration and compact codes.

A block has nodes ``0`` (input), ``1..k`` (stem operators, ``k <= 3``) and
``k + 1`` (output).  The stem runs ``0 -> 1 -> ... -> k+1`` and the input is
always joined into the output.  Extra skips ``(a, b)`` need ``b - a >= 2``.
All streams entering a node are merged with one operator, ``A`` (Add) or
``C`` (Concat), fixed per join point.

Channels: the first ``k - 1`` operators produce ``ratio * c`` channels, the
last produces ``c`` so the block preserves its input width.  An Add whose
inputs disagree gets a ``conv1x1`` adapter on each mismatched skip.  Concat
into the output node would break width preservation and is rejected.

Compact code::

    S<k>:<op>-<op>-..._R:<ratio>[_K:(<a>,<b>)<M>(<a>,<b>)<M>...]

with 0-based operator and ratio indices and skips sorted by ``(a, b)``; e.g.
``S3:2-5-1_R:1_K:(0,3)A``.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

from .model import ModelNode

__all__ = [
    "DEFAULT_OPS",
    "DEFAULT_RATIOS",
    "DnetBlockSpec",
    "validate_dnet_block",
    "render_dnet_block",
    "dnet_network",
    "enumerate_dnet_blocks",
    "count_dnet_blocks",
    "DnetEnumeration",
]

# Identities are not fixed by the block grammar, only the counts (7 and 5).
DEFAULT_OPS: tuple[dict, ...] = (
    {"type": "conv3x3", "kernel_size": 3, "groups": 1},
    {"type": "conv1x1", "kernel_size": 1, "groups": 1},
    {"type": "conv3x3_g2", "kernel_size": 3, "groups": 2},
    {"type": "conv3x3_g4", "kernel_size": 3, "groups": 4},
    {"type": "conv3x3_dw", "kernel_size": 3, "groups": "in"},
    {"type": "conv3x3_gc32", "kernel_size": 3, "groups": "in/32"},
    {"type": "conv3x3_dw_conv1x1", "kernel_size": 3, "separable": True},
)
DEFAULT_RATIOS: tuple[Fraction, ...] = (
    Fraction(1, 4), Fraction(1, 2), Fraction(1), Fraction(2), Fraction(4),
)
MERGES = {"A": "Add", "C": "Concat"}

_CODE = re.compile(r"^S(\d+):(\d+(?:-\d+)*)_R:(\d+)(?:_K:((?:\(\d+,\d+\)[A-Z])+))?$")
_SKIP = re.compile(r"\((\d+),(\d+)\)([A-Z])")


@dataclass(frozen=True, order=True)
class DnetBlockSpec:
    stem_ops: tuple[int, ...]
    ratio: int = 0
    skips: tuple[tuple[int, int, str], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "stem_ops", tuple(int(o) for o in self.stem_ops))
        object.__setattr__(self, "skips", tuple(sorted((int(a), int(b), str(m)) for a, b, m in self.skips)))

    @property
    def k(self) -> int:
        return len(self.stem_ops)

    @property
    def code(self) -> str:
        text = f"S{self.k}:{'-'.join(map(str, self.stem_ops))}_R:{self.ratio}"
        if self.skips:
            text += "_K:" + "".join(f"({a},{b}){m}" for a, b, m in self.skips)
        return text

    @classmethod
    def from_code(cls, code: str) -> "DnetBlockSpec":
        m = _CODE.match(code.strip())
        if not m:
            raise ValueError(f"malformed DNet block code {code!r}")
        k, ops, ratio, skips = m.groups()
        stem = tuple(int(o) for o in ops.split("-"))
        if int(k) != len(stem):
            raise ValueError(f"{code!r}: S{k} but {len(stem)} operators listed")
        parsed = tuple((int(a), int(b), letter) for a, b, letter in _SKIP.findall(skips or ""))
        spec = cls(stem, int(ratio), parsed)
        if spec.code != code.strip():
            raise ValueError(f"{code!r} is not in canonical form (expected {spec.code!r})")
        return spec

    def __str__(self) -> str:
        return self.code


def _join_points(spec: DnetBlockSpec) -> dict[int, list[tuple[int, str]]]:
    joins: dict[int, list[tuple[int, str]]] = {}
    for a, b, m in spec.skips:
        joins.setdefault(b, []).append((a, m))
    return joins


def validate_dnet_block(
    spec: DnetBlockSpec,
    vocab_size: int = len(DEFAULT_OPS),
    ratio_count: int = len(DEFAULT_RATIOS),
    max_stem: int = 3,
) -> list[str]:
    """Grammar violations of ``spec``; an empty list means the block is valid."""
    out = []
    k = spec.k
    if k == 0:
        out.append("empty stem")
    if k > max_stem:
        out.append(f"stem length > {max_stem}")
    for o in spec.stem_ops:
        if not 0 <= o < vocab_size:
            out.append(f"operator index {o} outside vocabulary of {vocab_size}")
    if not 0 <= spec.ratio < ratio_count:
        out.append(f"ratio index {spec.ratio} outside {ratio_count} options")
    pairs = [(a, b) for a, b, _ in spec.skips]
    if len(set(pairs)) != len(pairs):
        out.append("duplicate skip")
    for a, b, m in spec.skips:
        if m not in MERGES:
            out.append(f"unknown merge {m!r} on skip ({a},{b})")
        if not 0 <= a < b <= k + 1:
            out.append(f"skip ({a},{b}) outside nodes 0..{k + 1}")
        elif b - a < 2:
            out.append(f"non-disjunct skip ({a},{b})")
        elif (a, b) == (0, k + 1):
            out.append("skip duplicates the default input-output connection")
    for node, incoming in _join_points(spec).items():
        if len({m for _, m in incoming}) > 1:
            out.append(f"conflicting merges at node {node}")
        if node == k + 1 and any(m == "C" for _, m in incoming):
            out.append("channel mismatch at output: Concat would not preserve input channels")
    return out


# --------------------------------------------------------------------------
# rendering


def _groups(op: dict, cin: int) -> int:
    g = op.get("groups", 1)
    if g == "in":
        return cin
    if g == "in/32":
        return max(1, cin // 32)
    return int(g)


def render_dnet_block(
    spec: DnetBlockSpec,
    in_channels: int,
    *,
    name: str = "block",
    resolution: int | None = None,
    ops: Sequence[dict] = DEFAULT_OPS,
    ratios: Sequence[Fraction | float] = DEFAULT_RATIOS,
) -> ModelNode:
    """Expand ``spec`` into a block of operator nodes wired through ``inputs``."""
    problems = validate_dnet_block(spec, len(ops), len(ratios), max_stem=max(3, spec.k))
    if problems:
        raise ValueError(f"invalid block {spec.code}: {'; '.join(problems)}")
    c = int(in_channels)
    width = max(1, int(round(float(ratios[spec.ratio]) * c)))
    k = spec.k
    joins = _join_points(spec)
    joins.setdefault(k + 1, [])
    children: list[ModelNode] = []

    def emit(node_name: str, attrs: dict) -> tuple[str, int]:
        children.append(ModelNode(node_name, "operator", attrs))
        return node_name, attrs["out_channels"]

    streams: dict[int, tuple[str, int]] = {0: ("input", c)}
    for j in range(1, k + 2):
        main = streams[j - 1]
        if j in joins:
            incoming = [(a, streams[a]) for a, _ in joins[j]]
            if j == k + 1:
                incoming.append((0, streams[0]))
            letter = joins[j][0][1] if joins[j] else "A"
            feeds = [main[0]]
            if letter == "A":
                for a, (src, ch) in incoming:
                    if ch != main[1]:
                        src, _ = emit(
                            f"adapter_{a}_{j}",
                            {"type": "conv1x1", "role": "adapter", "kernel_size": 1, "groups": 1,
                             "in_channels": ch, "out_channels": main[1], "inputs": [src]},
                        )
                    feeds.append(src)
                merged_ch = main[1]
            else:
                feeds.extend(src for _, (src, _) in incoming)
                merged_ch = main[1] + sum(ch for _, (_, ch) in incoming)
            merge_name, _ = emit(
                f"{MERGES[letter].lower()}_{j}",
                {"type": MERGES[letter], "role": "merge", "in_channels": merged_ch,
                 "out_channels": merged_ch, "inputs": feeds},
            )
            current = emit(f"relu_merge_{j}", {"type": "ReLU", "role": "activation", "in_channels": merged_ch,
                                               "out_channels": merged_ch, "inputs": [merge_name]})
        else:
            current = main
        if j == k + 1:
            streams[j] = current
            break
        op = dict(ops[spec.stem_ops[j - 1]])
        cin = current[1]
        cout = c if j == k else width
        attrs = {
            "type": op["type"], "role": "stem", "kernel_size": op.get("kernel_size", 3),
            "groups": _groups(op, cin), "in_channels": cin, "out_channels": cout, "inputs": [current[0]],
        }
        if op.get("separable"):
            attrs["separable"] = True
        op_name, _ = emit(f"op{j}", attrs)
        bn = emit(f"bn{j}", {"type": "BatchNorm", "role": "norm", "in_channels": cout,
                             "out_channels": cout, "inputs": [op_name]})
        if (j + 1) in joins:
            streams[j] = bn
        else:
            streams[j] = emit(f"relu{j}", {"type": "ReLU", "role": "activation", "in_channels": cout,
                                           "out_channels": cout, "inputs": [bn[0]]})

    out_name, out_ch = streams[k + 1]
    if out_ch != c:
        raise ValueError(f"block {spec.code} does not preserve channels ({c} -> {out_ch})")
    attrs = {"code": spec.code, "in_channels": c, "out_channels": out_ch, "output": out_name}
    if resolution is not None:
        attrs["resolution"] = int(resolution)
    return ModelNode(name, "block", attrs, children)


def dnet_network(
    blocks: Sequence[DnetBlockSpec] | DnetBlockSpec,
    *,
    channels: int = 64,
    resolution: int = 32,
    in_channels: int = 3,
    num_classes: int = 10,
    repeats: int = 1,
    name: str = "dnet",
) -> ModelNode:
    """A small network: conv stem, the given blocks (each repeated), linear head."""
    if isinstance(blocks, DnetBlockSpec):
        blocks = [blocks]
    body = []
    for i, spec in enumerate(blocks):
        for r in range(repeats):
            body.append(render_dnet_block(spec, channels, name=f"block{i}_{r}"))
    stem = ModelNode("stem", "cell", {}, [
        ModelNode("conv", "operator", {"type": "conv3x3", "kernel_size": 3, "groups": 1,
                                       "in_channels": in_channels, "out_channels": channels}),
        ModelNode("bn", "operator", {"type": "BatchNorm", "in_channels": channels, "out_channels": channels}),
        ModelNode("relu", "operator", {"type": "ReLU", "in_channels": channels, "out_channels": channels}),
    ])
    head = ModelNode("head", "cell", {"resolution": 1}, [
        ModelNode("pool", "operator", {"type": "avgpool", "in_channels": channels, "out_channels": channels}),
        ModelNode("fc", "operator", {"type": "linear", "in_channels": channels, "out_channels": num_classes}),
    ])
    return ModelNode(
        name,
        "network",
        {"in_channels": in_channels, "resolution": resolution, "num_classes": num_classes,
         "blocks": [b.code for b in blocks]},
        [stem, ModelNode("body", "cell", {"channels": channels}, body), head],
    )


# --------------------------------------------------------------------------
# enumeration


def _candidate_skips(k: int) -> list[tuple[int, int]]:
    return [(a, b) for a in range(k + 2) for b in range(a + 2, k + 2) if (a, b) != (0, k + 1)]


def _merge_options(node: int, k: int) -> tuple[str, ...]:
    return ("A",) if node == k + 1 else ("A", "C")


def _iter_skip_layouts(k: int) -> Iterator[tuple[tuple[int, int, str], ...]]:
    cands = _candidate_skips(k)
    for size in range(len(cands) + 1):
        for subset in itertools.combinations(cands, size):
            targets = sorted({b for _, b in subset})
            for letters in itertools.product(*(_merge_options(t, k) for t in targets)):
                choice = dict(zip(targets, letters))
                yield tuple((a, b, choice[b]) for a, b in subset)


def count_dnet_blocks(vocab_size: int = 7, ratio_count: int = 5, max_stem: int = 3) -> int:
    """Closed-form count: per stem length, ops x ratios x product over join points."""
    total = 0
    for k in range(1, max_stem + 1):
        layouts = 1
        for node in range(2, k + 2):
            sources = sum(1 for a, b in _candidate_skips(k) if b == node)
            layouts *= 1 + (2 ** sources - 1) * len(_merge_options(node, k))
        total += vocab_size ** k * ratio_count * layouts
    return total


@dataclass(frozen=True)
class DnetEnumeration:
    vocab_size: int
    ratio_count: int
    max_stem: int

    @property
    def count(self) -> int:
        return count_dnet_blocks(self.vocab_size, self.ratio_count, self.max_stem)

    def __len__(self) -> int:
        return self.count

    def __iter__(self) -> Iterator[DnetBlockSpec]:
        for k in range(1, self.max_stem + 1):
            layouts = list(_iter_skip_layouts(k))
            for ops in itertools.product(range(self.vocab_size), repeat=k):
                for r in range(self.ratio_count):
                    for skips in layouts:
                        yield DnetBlockSpec(ops, r, skips)


def enumerate_dnet_blocks(vocab_size: int = 7, ratio_count: int = 5, max_stem: int = 3) -> DnetEnumeration:
    """All valid blocks in canonical order (stem length, ops, ratio, skips, merges)."""
    if vocab_size < 1 or max_stem < 1 or ratio_count < 1:
        raise ValueError("vocab_size, ratio_count and max_stem must be >= 1")
    return DnetEnumeration(vocab_size, ratio_count, max_stem)
