"""Framework-independent model descriptions with dotted-name binding.

A description is a tree of :class:`ModelNode` values.  Any attribute in the
tree is addressable by a dotted path: node names, then an attribute name.  Two
kinds of pseudo-segment fan out to several nodes at once:

* a kind name (``cell``, ``block``, ``operator``) selects every descendant of
  that kind, in pre-order, when no child carries that literal name;
* ``convs`` selects every convolution operator beneath the current node.

A path that fans out yields a list reference; array-valued samples are then
distributed positionally over it.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from typing import Any, Iterator, Mapping

__all__ = [
    "KINDS",
    "ModelNode",
    "AttrRef",
    "ResolveError",
    "resolve",
    "apply_sample",
    "sample_values",
    "validate_description",
    "diff_leaves",
    "iter_nodes",
    "is_conv",
]

KINDS = ("network", "cell", "block", "operator")
_RANK = {k: i for i, k in enumerate(KINDS)}


class ResolveError(KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unresolvable path"


@dataclass
class ModelNode:
    name: str
    kind: str
    attrs: dict = field(default_factory=dict)
    children: list["ModelNode"] = field(default_factory=list)

    def child(self, name: str) -> "ModelNode | None":
        for c in self.children:
            if c.name == name:
                return c
        return None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "attrs": copy.deepcopy(self.attrs),
            "children": [c.to_dict() for c in self.children],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ModelNode":
        return cls(
            name=data["name"],
            kind=data["kind"],
            attrs=copy.deepcopy(dict(data.get("attrs", {}))),
            children=[cls.from_dict(c) for c in data.get("children", [])],
        )

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ModelNode":
        return cls.from_dict(json.loads(text))

    def copy(self) -> "ModelNode":
        return ModelNode.from_dict(self.to_dict())


def iter_nodes(node: ModelNode, prefix: tuple[int, ...] = ()) -> Iterator[tuple[tuple[int, ...], ModelNode]]:
    """Pre-order walk yielding (child-index path, node)."""
    yield prefix, node
    for i, c in enumerate(node.children):
        yield from iter_nodes(c, prefix + (i,))


def is_conv(node: ModelNode) -> bool:
    return node.kind == "operator" and str(node.attrs.get("type", "")).lower().startswith("conv")


def _node_at(root: ModelNode, path: tuple[int, ...]) -> ModelNode:
    node = root
    for i in path:
        node = node.children[i]
    return node


@dataclass(frozen=True)
class AttrRef:
    """Where a dotted path points: one attribute on each of ``nodes``."""

    path: str
    nodes: tuple[tuple[int, ...], ...]
    attr: str
    multi: bool

    def get(self, root: ModelNode) -> Any:
        values = [_node_at(root, p).attrs[self.attr] for p in self.nodes]
        return values if self.multi else values[0]


def _expand(root: ModelNode, at: tuple[int, ...], segment: str) -> tuple[list[tuple[int, ...]], bool]:
    node = _node_at(root, at)
    for i, c in enumerate(node.children):
        if c.name == segment:
            return [at + (i,)], False
    if segment == "convs":
        return [at + p for p, n in iter_nodes(node) if p and is_conv(n)], True
    if segment in ("cell", "block", "operator"):
        return [at + p for p, n in iter_nodes(node) if p and n.kind == segment], True
    return [], False


def resolve(desc: ModelNode, path: str) -> AttrRef:
    """Resolve ``path`` (``root.seg....attr``) against ``desc``."""
    segments = [s for s in path.split(".")]
    if not path or any(not s for s in segments):
        raise ResolveError(f"malformed path {path!r}")
    if segments[0] != desc.name:
        raise ResolveError(f"unknown segment {segments[0]!r} in {path!r}")
    if len(segments) < 2:
        raise ResolveError(f"path {path!r} names a node, not an attribute")
    targets: list[tuple[int, ...]] = [()]
    multi = False
    for seg in segments[1:-1]:
        expanded: list[tuple[int, ...]] = []
        for t in targets:
            found, fanned = _expand(desc, t, seg)
            multi = multi or fanned
            expanded.extend(found)
        if not expanded:
            raise ResolveError(f"unknown segment {seg!r} in {path!r}")
        targets = expanded
    attr = segments[-1]
    missing = [t for t in targets if attr not in _node_at(desc, t).attrs]
    if missing:
        where = _node_at(desc, missing[0]).name
        raise ResolveError(f"attribute {attr!r} absent at node {where!r} (path {path!r})")
    return AttrRef(path, tuple(targets), attr, multi)


def sample_values(sample: Any) -> Mapping[str, Any]:
    """The key/value mapping of a ConfigSample or of a plain mapping."""
    return sample if isinstance(sample, Mapping) else sample.values


def apply_sample(desc: ModelNode, sample: Any) -> ModelNode:
    """Return a copy of ``desc`` with every sampled attribute replaced.

    ``sample`` is a :class:`~vega.sampler.ConfigSample` or a plain mapping.
    The input tree is left untouched.
    """
    values = sample_values(sample)
    out = desc.copy()
    for key, value in values.items():
        ref = resolve(out, key)
        if ref.multi:
            if isinstance(value, (list, tuple)):
                if len(value) != len(ref.nodes):
                    raise ValueError(f"{key}: {len(value)} values for {len(ref.nodes)} targets")
                items = list(value)
            else:
                items = [value] * len(ref.nodes)
            for p, v in zip(ref.nodes, items):
                _node_at(out, p).attrs[ref.attr] = copy.deepcopy(v)
        else:
            _node_at(out, ref.nodes[0]).attrs[ref.attr] = copy.deepcopy(value)
    return out


def validate_description(desc: ModelNode) -> list[str]:
    """Structural problems: unknown kinds, bad nesting, duplicate sibling names."""
    problems = []

    def walk(node: ModelNode, dotted: str) -> None:
        if node.kind not in _RANK:
            problems.append(f"{dotted}: unknown kind {node.kind!r}")
            return
        names = [c.name for c in node.children]
        for name in sorted({n for n in names if names.count(n) > 1}):
            problems.append(f"{dotted}: duplicate child name {name!r}")
        for c in node.children:
            if c.kind in _RANK and _RANK[c.kind] <= _RANK[node.kind]:
                problems.append(f"{dotted}.{c.name}: {c.kind} cannot nest inside {node.kind}")
            walk(c, f"{dotted}.{c.name}")

    walk(desc, desc.name)
    return problems


def diff_leaves(a: ModelNode, b: ModelNode) -> list[str]:
    """Dotted attribute paths whose values differ between two same-shaped trees."""
    changed = []

    def walk(x: ModelNode, y: ModelNode, dotted: str) -> None:
        if x.name != y.name or x.kind != y.kind or len(x.children) != len(y.children):
            changed.append(dotted)
            return
        for k in sorted(set(x.attrs) | set(y.attrs)):
            if x.attrs.get(k, _MISSING) != y.attrs.get(k, _MISSING):
                changed.append(f"{dotted}.{k}")
        for cx, cy in zip(x.children, y.children):
            walk(cx, cy, f"{dotted}.{cx.name}")

    walk(a, b, a.name)
    return changed


_MISSING = object()
