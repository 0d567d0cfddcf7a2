"""Search-space description language.

A space is an ordered list of typed hyperparameters plus a set of activation
conditions.  Conditions form a parent -> child DAG; a child is only active when
its parent is active and the condition holds.

Documents look like::

    search_space:
      type: SearchSpace
      hyperparameters:
        - key: trainer.optim.type
          type: STRING
          range: [Adam, SGD]
        - key: trainer.optim.params.momentum
          type: FLOAT
          range: [0.0, 0.99]
      condition:
        - key: condition_for_sgd_momentum
          child: trainer.optim.params.momentum
          parent: trainer.optim.type
          type: EQUAL
          range: [SGD]
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import yaml

from . import _yaml

__all__ = [
    "ParamType",
    "ConditionType",
    "ParamSpec",
    "ConditionSpec",
    "SearchSpace",
    "Diagnostic",
    "SpaceError",
    "parse_space",
    "space_from_dict",
    "space_to_dict",
    "serialize_space",
    "validate_space",
    "active_keys",
    "condition_holds",
    "topological_order",
]


class ParamType(str, enum.Enum):
    INT = "INT"
    INT_EXP = "INT_EXP"
    INT_CAT = "INT_CAT"
    FLOAT = "FLOAT"
    FLOAT_EXP = "FLOAT_EXP"
    FLOAT_CAT = "FLOAT_CAT"
    STRING = "STRING"
    INT_ARRAY = "INT_ARRAY"
    MULTIPLY_POSITION_ARRAY = "MULTIPLY_POSITION_ARRAY"
    BINARY_ARRAY = "BINARY_ARRAY"

    @property
    def is_array(self) -> bool:
        return self in _ARRAY_TYPES

    @property
    def is_categorical(self) -> bool:
        return self in (ParamType.INT_CAT, ParamType.FLOAT_CAT, ParamType.STRING)

    @property
    def is_interval(self) -> bool:
        return self in (ParamType.INT, ParamType.INT_EXP, ParamType.FLOAT, ParamType.FLOAT_EXP)

    @property
    def is_exp(self) -> bool:
        return self in (ParamType.INT_EXP, ParamType.FLOAT_EXP)

    @property
    def is_integer(self) -> bool:
        return self in (ParamType.INT, ParamType.INT_EXP, ParamType.INT_CAT)


_ARRAY_TYPES = frozenset(
    {ParamType.INT_ARRAY, ParamType.MULTIPLY_POSITION_ARRAY, ParamType.BINARY_ARRAY}
)

# Spellings seen in existing config files, mapped to canonical names.
_TYPE_ALIASES = {
    "INTARRAY": ParamType.INT_ARRAY,
    "MUTILYPOSITIONARRAY": ParamType.MULTIPLY_POSITION_ARRAY,
    "MULTIPLYPOSITIONARRAY": ParamType.MULTIPLY_POSITION_ARRAY,
    "BINARYARRAY": ParamType.BINARY_ARRAY,
}

_EXTRA_ALIASES = {"lenth": "length"}
_EXTRA_KEYS = ("length", "times", "n", "count")


class ConditionType(str, enum.Enum):
    EQUAL = "EQUAL"
    NOT_EQUAL = "NOT_EQUAL"
    IN = "IN"
    FORBIDDEN = "FORBIDDEN"


_SEGMENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_TUPLE = re.compile(r"^\s*\(\s*([^(),]+)\s*,\s*([^(),]+)\s*\)\s*$")


class SpaceError(ValueError):
    """Raised when a search-space document cannot be turned into a valid space."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}, column {column}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Diagnostic:
    key: str
    rule: str
    message: str = ""

    def __str__(self) -> str:
        return f"{self.key}: {self.rule}" + (f" ({self.message})" if self.message else "")


@dataclass(frozen=True)
class ParamSpec:
    """One typed hyperparameter.

    ``range`` holds scalars for interval/categorical types.  For ``INT_ARRAY``
    it holds one ``(lo, hi)`` pair per position; for
    ``MULTIPLY_POSITION_ARRAY`` the initial values; for ``BINARY_ARRAY`` the
    matrix shape ``(rows, cols)``.
    """

    key: str
    ptype: ParamType
    range: tuple
    extras: Mapping[str, int] = field(default_factory=dict)

    def __hash__(self) -> int:
        return hash((self.key, self.ptype, self.range, tuple(sorted(self.extras.items()))))

    @property
    def length(self) -> int | None:
        return self.extras.get("length")

    @property
    def times(self) -> int | None:
        return self.extras.get("times")

    @property
    def n(self) -> int | None:
        return self.extras.get("n")

    @property
    def count(self) -> int:
        return self.extras.get("count", 1)

    def interval(self, position: int = 0) -> tuple:
        if self.ptype is ParamType.INT_ARRAY:
            return self.range[position]
        return self.range[0], self.range[1]


@dataclass(frozen=True)
class ConditionSpec:
    key: str
    child: str
    parent: str
    ctype: ConditionType
    range: tuple


@dataclass(frozen=True)
class SearchSpace:
    params: tuple[ParamSpec, ...] = ()
    conditions: tuple[ConditionSpec, ...] = ()
    type: str = "SearchSpace"

    def __post_init__(self) -> None:
        object.__setattr__(self, "params", tuple(self.params))
        object.__setattr__(self, "conditions", tuple(self.conditions))

    def __len__(self) -> int:
        return len(self.params)

    def __iter__(self):
        return iter(self.params)

    def __contains__(self, key: object) -> bool:
        return any(p.key == key for p in self.params)

    def __getitem__(self, key: str) -> ParamSpec:
        for p in self.params:
            if p.key == key:
                return p
        raise KeyError(key)

    @property
    def keys(self) -> list[str]:
        return [p.key for p in self.params]

    @property
    def dag(self) -> dict[str, list[str]]:
        """Parent -> children adjacency derived from the conditions."""
        graph: dict[str, list[str]] = {}
        for c in self.conditions:
            graph.setdefault(c.parent, []).append(c.child)
        return graph

    def condition_for(self, key: str) -> ConditionSpec | None:
        for c in self.conditions:
            if c.child == key:
                return c
        return None


# --------------------------------------------------------------------------
# validation


def _is_number(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check_param(p: ParamSpec) -> list[Diagnostic]:
    out = []
    key = p.key or "<empty>"
    if not p.key or not all(_SEGMENT.match(s) for s in p.key.split(".")):
        out.append(Diagnostic(key, "malformed key", "segments must match [A-Za-z_][A-Za-z0-9_]*"))
    t = p.ptype
    extras = dict(p.extras)
    if t.is_array:
        if "length" in extras and extras["length"] < 1:
            out.append(Diagnostic(key, "length must be >= 1"))
    else:
        if extras:
            out.append(Diagnostic(key, "array extras on scalar type", ", ".join(sorted(extras))))

    if t.is_interval:
        if len(p.range) != 2 or not all(_is_number(v) for v in p.range):
            out.append(Diagnostic(key, "malformed range", "interval types need [lo, hi]"))
            return out
        lo, hi = p.range
        if lo > hi:
            out.append(Diagnostic(key, "malformed range", "lo > hi"))
        if t.is_exp and lo <= 0:
            out.append(Diagnostic(key, "malformed range", "exponential types need lo > 0"))
        if t.is_integer and not (float(lo).is_integer() and float(hi).is_integer()):
            out.append(Diagnostic(key, "malformed range", "integer types need integer bounds"))
    elif t.is_categorical:
        if not p.range:
            out.append(Diagnostic(key, "empty categorical range"))
        if len(set(map(repr, p.range))) != len(p.range):
            out.append(Diagnostic(key, "duplicate categories"))
        if t is ParamType.STRING and not all(isinstance(v, str) for v in p.range):
            out.append(Diagnostic(key, "malformed range", "STRING categories must be strings"))
        if t is ParamType.INT_CAT and not all(isinstance(v, int) and not isinstance(v, bool) for v in p.range):
            out.append(Diagnostic(key, "malformed range", "INT_CAT categories must be integers"))
        if t is ParamType.FLOAT_CAT and not all(_is_number(v) for v in p.range):
            out.append(Diagnostic(key, "malformed range", "FLOAT_CAT categories must be numbers"))
    elif t is ParamType.INT_ARRAY:
        if not p.range:
            out.append(Diagnostic(key, "malformed range", "INT_ARRAY needs at least one interval"))
        for iv in p.range:
            if not (isinstance(iv, tuple) and len(iv) == 2 and all(isinstance(v, int) for v in iv)):
                out.append(Diagnostic(key, "malformed range", f"bad interval {iv!r}"))
            elif iv[0] > iv[1]:
                out.append(Diagnostic(key, "malformed range", f"lo > hi in {iv!r}"))
        if p.length is not None and len(p.range) != p.length:
            out.append(Diagnostic(key, "range length != length"))
    elif t is ParamType.MULTIPLY_POSITION_ARRAY:
        if not p.range or not all(_is_number(v) for v in p.range):
            out.append(Diagnostic(key, "malformed range", "initial values must be numbers"))
        for name in ("length", "times", "n"):
            if name not in extras:
                out.append(Diagnostic(key, f"missing {name}"))
        if "length" in extras and "times" in extras:
            if not 1 <= extras["times"] <= extras["length"]:
                out.append(Diagnostic(key, "times out of bounds", "need 1 <= times <= length"))
    elif t is ParamType.BINARY_ARRAY:
        if len(p.range) != 2 or not all(isinstance(v, int) and v >= 1 for v in p.range):
            out.append(Diagnostic(key, "malformed range", "BINARY_ARRAY needs [rows, cols]"))
        if extras.get("count", 1) < 1:
            out.append(Diagnostic(key, "count must be >= 1"))
    return out


def _value_compatible(parent: ParamSpec, value: Any) -> bool:
    t = parent.ptype
    if t is ParamType.STRING:
        return isinstance(value, str)
    if t in (ParamType.INT, ParamType.INT_EXP, ParamType.INT_CAT):
        return isinstance(value, int) and not isinstance(value, bool)
    if t in (ParamType.FLOAT, ParamType.FLOAT_EXP):
        if isinstance(value, tuple):
            return len(value) == 2 and all(_is_number(v) for v in value) and value[0] <= value[1]
        return _is_number(value)
    if t is ParamType.FLOAT_CAT:
        return _is_number(value)
    return False


def _find_cycle(keys: Iterable[str], graph: Mapping[str, Sequence[str]]) -> list[str] | None:
    white, grey, black = 0, 1, 2
    color = {k: white for k in keys}
    stack_path: list[str] = []

    def visit(node: str) -> list[str] | None:
        color[node] = grey
        stack_path.append(node)
        for nxt in graph.get(node, ()):
            if color.get(nxt, white) == grey:
                return stack_path[stack_path.index(nxt):] + [nxt]
            if color.get(nxt, white) == white:
                found = visit(nxt)
                if found:
                    return found
        stack_path.pop()
        color[node] = black
        return None

    for k in list(color):
        if color[k] == white:
            found = visit(k)
            if found:
                return found
    return None


def validate_space(space: SearchSpace) -> list[Diagnostic]:
    """Check every invariant of ``space``; returns an empty list when valid."""
    diags: list[Diagnostic] = []
    seen: set[str] = set()
    for p in space.params:
        diags.extend(_check_param(p))
        if p.key in seen:
            diags.append(Diagnostic(p.key, "duplicate key"))
        seen.add(p.key)

    by_key = {p.key: p for p in space.params}
    children: dict[str, str] = {}
    for c in space.conditions:
        name = c.key or f"{c.parent}->{c.child}"
        if c.child == c.parent:
            diags.append(Diagnostic(name, "child equals parent"))
        if c.parent not in by_key:
            diags.append(Diagnostic(name, "dangling parent reference", c.parent))
        if c.child not in by_key:
            diags.append(Diagnostic(name, "dangling child reference", c.child))
        if c.child in children:
            diags.append(Diagnostic(name, "multiple conditions on child", f"{c.child} already conditioned by {children[c.child]}"))
        children.setdefault(c.child, name)
        if not c.range:
            diags.append(Diagnostic(name, "empty condition range"))
        parent = by_key.get(c.parent)
        if parent is not None:
            if parent.ptype.is_array:
                diags.append(Diagnostic(name, "array-typed parent", c.parent))
            elif not all(_value_compatible(parent, v) for v in c.range):
                diags.append(Diagnostic(name, "incompatible condition range", f"values {list(c.range)!r} vs {parent.ptype.value}"))
            elif any(isinstance(v, tuple) for v in c.range) and c.ctype is not ConditionType.IN:
                diags.append(Diagnostic(name, "interval range only allowed for IN"))

    cycle = _find_cycle(by_key, space.dag)
    if cycle:
        diags.append(Diagnostic(cycle[0], "condition cycle", " -> ".join(cycle)))
    return diags


def topological_order(space: SearchSpace) -> list[str]:
    """Param keys ordered so every parent precedes its children (stable on document order)."""
    # Spaces are frozen, so the order is computed once per instance.
    cached = space.__dict__.get("_topological_order")
    if cached is None:
        cached = _topological_order(space)
        object.__setattr__(space, "_topological_order", cached)
    return list(cached)


def _topological_order(space: SearchSpace) -> tuple[str, ...]:
    indeg = {p.key: 0 for p in space.params}
    for c in space.conditions:
        if c.child in indeg:
            indeg[c.child] += 1
    graph = space.dag
    order: list[str] = []
    ready = [k for k in indeg if indeg[k] == 0]
    position = {k: i for i, k in enumerate(indeg)}
    while ready:
        ready.sort(key=position.__getitem__)
        k = ready.pop(0)
        order.append(k)
        for child in graph.get(k, ()):
            indeg[child] -= 1
            if indeg[child] == 0:
                ready.append(child)
    if len(order) != len(indeg):
        raise SpaceError("condition cycle")
    return tuple(order)


# --------------------------------------------------------------------------
# activation


def condition_holds(cond: ConditionSpec, value: Any) -> bool:
    """Whether ``cond`` leaves its child enabled given the parent's ``value``."""
    if cond.ctype is ConditionType.EQUAL:
        return any(value == v for v in cond.range)
    if cond.ctype is ConditionType.NOT_EQUAL:
        return all(value != v for v in cond.range)
    member = any(
        (v[0] <= value <= v[1]) if isinstance(v, tuple) else value == v for v in cond.range
    )
    if cond.ctype is ConditionType.IN:
        return member
    return not member  # FORBIDDEN


def active_keys(space: SearchSpace, assignment: Mapping[str, Any]) -> set[str]:
    """Keys whose whole chain of ancestor conditions is satisfied by ``assignment``."""
    active: set[str] = set()
    for key in topological_order(space):
        cond = space.condition_for(key)
        if cond is None:
            if key not in assignment:
                raise KeyError(f"assignment is missing root param {key!r}")
            active.add(key)
            continue
        if cond.parent not in active:
            continue
        if cond.parent not in assignment:
            raise KeyError(f"assignment is missing active param {cond.parent!r}")
        if condition_holds(cond, assignment[cond.parent]):
            active.add(key)
    return active


# --------------------------------------------------------------------------
# parsing / serialization


def _parse_tuple_string(s: str) -> tuple | None:
    m = _TUPLE.match(s)
    if not m:
        return None
    return tuple(_yaml.load(part) for part in m.groups())


def _normalize_scalar_or_tuple(v: Any) -> Any:
    if isinstance(v, str):
        tup = _parse_tuple_string(v)
        if tup is not None:
            return tup
    if isinstance(v, list):
        return tuple(v)
    return v


def _normalize_range(ptype: ParamType, raw: Any, extras: dict) -> tuple:
    if isinstance(raw, str):
        tup = _parse_tuple_string(raw)
        if tup is None:
            raise SpaceError(f"malformed range {raw!r}")
        raw = list(tup)
    if not isinstance(raw, (list, tuple)):
        raw = [raw]
    items = [_normalize_scalar_or_tuple(v) for v in raw]
    if ptype is ParamType.INT_ARRAY:
        if items and all(not isinstance(v, tuple) for v in items):
            if len(items) != 2:
                raise SpaceError("INT_ARRAY range must be an interval or a list of intervals")
            items = [tuple(items)]
        if len(items) == 1 and "length" in extras:
            items = items * extras["length"]
    return tuple(items)


def _parse_ptype(name: Any) -> ParamType:
    if isinstance(name, ParamType):
        return name
    text = str(name).strip()
    try:
        return ParamType(text.upper())
    except ValueError:
        pass
    alias = _TYPE_ALIASES.get(text.replace("_", "").upper())
    if alias is None:
        raise SpaceError(f"unknown param type {text!r}")
    return alias


def _as_list(block: Any, what: str) -> list:
    if block is None:
        return []
    if isinstance(block, Mapping):
        return [block]
    if not isinstance(block, list):
        raise SpaceError(f"{what} must be a list of mappings")
    return block


def space_from_dict(doc: Mapping[str, Any]) -> SearchSpace:
    """Build and validate a space from an already-parsed mapping."""
    if "search_space" in doc and "hyperparameters" not in doc:
        doc = doc["search_space"] or {}
    if not isinstance(doc, Mapping):
        raise SpaceError("search_space must be a mapping")
    params = []
    for item in _as_list(doc.get("hyperparameters"), "hyperparameters"):
        if not isinstance(item, Mapping):
            raise SpaceError("each hyperparameter must be a mapping")
        for field_name in ("key", "type", "range"):
            if field_name not in item:
                raise SpaceError(f"hyperparameter {item.get('key', '?')!r} is missing {field_name!r}")
        ptype = _parse_ptype(item["type"])
        extras = {}
        for raw_name, v in item.items():
            name = _EXTRA_ALIASES.get(raw_name, raw_name)
            if name in _EXTRA_KEYS:
                if not isinstance(v, int) or isinstance(v, bool):
                    raise SpaceError(f"{item['key']}: {raw_name} must be an integer")
                extras[name] = v
        params.append(ParamSpec(str(item["key"]), ptype, _normalize_range(ptype, item["range"], extras), extras))

    params = _resolve_binary_counts(params)

    conditions = []
    cond_block = doc.get("conditions", doc.get("condition"))
    for item in _as_list(cond_block, "condition"):
        for field_name in ("child", "parent", "type", "range"):
            if field_name not in item:
                raise SpaceError(f"condition {item.get('key', '?')!r} is missing {field_name!r}")
        try:
            ctype = ConditionType(str(item["type"]).upper())
        except ValueError:
            raise SpaceError(f"unknown condition type {item['type']!r}") from None
        rng = item["range"]
        if not isinstance(rng, list):
            rng = [rng]
        conditions.append(
            ConditionSpec(
                key=str(item.get("key", "")),
                child=str(item["child"]),
                parent=str(item["parent"]),
                ctype=ctype,
                range=tuple(_normalize_scalar_or_tuple(v) for v in rng),
            )
        )

    space = SearchSpace(tuple(params), tuple(conditions), str(doc.get("type", "SearchSpace")))
    diags = validate_space(space)
    if diags:
        raise SpaceError("; ".join(str(d) for d in diags))
    return space


def _resolve_binary_counts(params: list[ParamSpec]) -> list[ParamSpec]:
    # A BINARY_ARRAY ``<prefix>.value`` takes its matrix count from a sibling
    # ``<prefix>.count`` categorical param (its largest value) unless given inline.
    by_key = {p.key: p for p in params}
    out = []
    for p in params:
        if p.ptype is ParamType.BINARY_ARRAY and "count" not in p.extras:
            prefix = p.key.rsplit(".", 1)[0]
            sibling = by_key.get(prefix + ".count")
            if sibling is not None and sibling.ptype in (ParamType.INT_CAT, ParamType.INT) and sibling.range:
                p = ParamSpec(p.key, p.ptype, p.range, {**p.extras, "count": int(max(sibling.range))})
        out.append(p)
    return out


def parse_space(document: str) -> SearchSpace:
    """Parse a search-space document (YAML subset) into a validated space.

    The document may either be the ``search_space`` block itself or contain
    one at top level.
    """
    try:
        doc = _yaml.load(document)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        if mark is not None:
            raise SpaceError(f"syntax error: {getattr(exc, 'problem', exc)}", mark.line + 1, mark.column + 1) from exc
        raise SpaceError(f"syntax error: {exc}") from exc
    if doc is None:
        doc = {}
    if not isinstance(doc, Mapping):
        raise SpaceError("document must be a mapping")
    return space_from_dict(doc)


def _plain(v: Any) -> Any:
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    return v


def space_to_dict(space: SearchSpace) -> dict:
    params = []
    for p in space.params:
        item: dict[str, Any] = {"key": p.key, "type": p.ptype.value, "range": _plain(p.range)}
        for name in _EXTRA_KEYS:
            if name in p.extras:
                item[name] = p.extras[name]
        params.append(item)
    doc: dict[str, Any] = {"type": space.type, "hyperparameters": params}
    if space.conditions:
        doc["condition"] = [
            {
                "key": c.key,
                "child": c.child,
                "parent": c.parent,
                "type": c.ctype.value,
                "range": _plain(c.range),
            }
            for c in space.conditions
        ]
    return doc


def serialize_space(space: SearchSpace) -> str:
    """Emit a document that :func:`parse_space` maps back to an equal space."""
    return _yaml.dump({"search_space": space_to_dict(space)})
