"""Encode / decode between typed hyperparameters and the unit cube.

Every param owns ``encoding_dim(spec)`` coordinates in ``[0, 1]``.  Sampling
draws all coordinates uniformly from a seeded Philox generator (numpy's
counter-based bit generator), then decodes them in condition order.  Inactive
params keep their coordinates so the encoded dimension is fixed per space.

Decoding rules:

* ``FLOAT``: ``lo + u * (hi - lo)``.
* ``FLOAT_EXP``: ``exp(ln lo + u * (ln hi - ln lo))``.
* ``INT`` / ``INT_EXP``: the same maps over ``[lo - 1/2, hi + 1/2]``, then
  rounded half away from zero and clamped to ``[lo, hi]``.  Widening by half a
  unit gives every integer an equal share of the cube (log-scaled for
  ``INT_EXP``) instead of halving the endpoints.
* categorical: index ``min(floor(u * k), k - 1)``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .space import ParamSpec, ParamType, SearchSpace, active_keys, topological_order

__all__ = [
    "EncodedSample",
    "ConfigSample",
    "encoding_dim",
    "space_dim",
    "decode",
    "decode_int_array",
    "decode_multiply_position_array",
    "decode_binary_array",
    "multiply_positions",
    "encode_value",
    "decode_sample",
    "sample",
    "make_rng",
    "derive_seed",
    "round_half_away",
]


def make_rng(seed: int) -> np.random.Generator:
    """Seeded generator used for every stochastic decision in the package."""
    return np.random.Generator(np.random.Philox(int(seed)))


def derive_seed(*parts: Any) -> int:
    """Stable 63-bit seed from arbitrary printable parts (independent of PYTHONHASHSEED)."""
    digest = hashlib.sha256(json.dumps([str(p) for p in parts]).encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def round_half_away(x: float) -> int:
    return int(math.floor(abs(x) + 0.5)) * (1 if x >= 0 else -1)


@dataclass(frozen=True)
class EncodedSample:
    coords: Mapping[str, tuple[float, ...]]

    def vector(self) -> np.ndarray:
        return np.concatenate([np.asarray(v, dtype=float) for v in self.coords.values()]) if self.coords else np.zeros(0)

    def to_json(self) -> dict:
        return {k: list(v) for k, v in self.coords.items()}

    @classmethod
    def from_json(cls, data: Mapping[str, Sequence[float]]) -> "EncodedSample":
        return cls({k: tuple(float(x) for x in v) for k, v in data.items()})


@dataclass(frozen=True)
class ConfigSample:
    values: Mapping[str, Any]
    provenance: Mapping[str, Any] = field(default_factory=dict, compare=False)

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    def __contains__(self, key: object) -> bool:
        return key in self.values

    def keys(self):
        return self.values.keys()

    def to_json(self) -> dict:
        return {k: _jsonable(v) for k, v in self.values.items()}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), separators=(",", ":"))


def _jsonable(v: Any) -> Any:
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.generic):
        return v.item()
    return v


# --------------------------------------------------------------------------
# dimensions


def encoding_dim(spec: ParamSpec) -> int:
    t = spec.ptype
    if t is ParamType.INT_ARRAY:
        return len(spec.range)
    if t is ParamType.MULTIPLY_POSITION_ARRAY:
        return spec.times
    if t is ParamType.BINARY_ARRAY:
        return spec.count * spec.range[0]
    return 1


def space_dim(space: SearchSpace) -> int:
    return sum(encoding_dim(p) for p in space.params)


# --------------------------------------------------------------------------
# decoding


def _check_unit(u: Sequence[float], expected: int) -> np.ndarray:
    arr = np.asarray(u, dtype=float).reshape(-1)
    if arr.size != expected:
        raise ValueError(f"expected {expected} coordinates, got {arr.size}")
    # NaN fails both comparisons, so it is rejected here too.
    if not all(0.0 <= x <= 1.0 for x in arr.tolist()):
        raise ValueError("coordinates must lie in [0, 1]")
    return arr


def _category_index(u: float, k: int) -> int:
    return min(int(math.floor(u * k)), k - 1)


def _decode_int(u: float, lo: int, hi: int, exp: bool = False) -> int:
    if exp:
        a, b = math.log(lo - 0.5), math.log(hi + 0.5)
        x = math.exp(a + u * (b - a))
    else:
        x = (lo - 0.5) + u * (hi - lo + 1)
    return min(max(round_half_away(x), lo), hi)


def _decode_scalar(spec: ParamSpec, u: float) -> Any:
    t = spec.ptype
    if t.is_categorical:
        return spec.range[_category_index(u, len(spec.range))]
    lo, hi = spec.range
    if t is ParamType.FLOAT:
        return float(min(max(lo + u * (hi - lo), lo), hi))
    if t is ParamType.FLOAT_EXP:
        a, b = math.log(lo), math.log(hi)
        return float(min(max(math.exp(a + u * (b - a)), lo), hi))
    return _decode_int(u, int(lo), int(hi), exp=t is ParamType.INT_EXP)


def decode(spec: ParamSpec, u: Sequence[float] | float) -> Any:
    """Map ``encoding_dim(spec)`` unit coordinates to a typed value."""
    t = spec.ptype
    if t is ParamType.INT_ARRAY:
        return decode_int_array(spec, u)
    if t is ParamType.MULTIPLY_POSITION_ARRAY:
        return decode_multiply_position_array(spec, u)
    if t is ParamType.BINARY_ARRAY:
        return decode_binary_array(spec, u)
    if isinstance(u, (tuple, list)) and len(u) == 1:
        x = float(u[0])
        if not 0.0 <= x <= 1.0:
            raise ValueError("coordinates must lie in [0, 1]")
        return _decode_scalar(spec, x)
    arr = _check_unit(np.atleast_1d(u), 1)
    return _decode_scalar(spec, float(arr[0]))


def decode_int_array(spec: ParamSpec, u: Sequence[float]) -> list[int]:
    if spec.length is not None and len(spec.range) != spec.length:
        raise ValueError(f"{spec.key}: {len(spec.range)} intervals for length {spec.length}")
    arr = _check_unit(u, len(spec.range))
    return [_decode_int(float(x), int(lo), int(hi)) for x, (lo, hi) in zip(arr, spec.range)]


def multiply_positions(initial: Sequence[int], positions: Sequence[int], n: int) -> list:
    out = list(initial)
    for i in set(positions):
        out[i] = out[i] * n
    return out


def _initial_array(spec: ParamSpec) -> list:
    values = list(spec.range[: spec.length])
    while len(values) < spec.length:
        values.append(values[-1])
    return values


def _chosen_positions(u: np.ndarray, length: int) -> list[int]:
    # Partial Fisher-Yates: coordinate j picks among the length - j unused slots.
    pool = list(range(length))
    for j, x in enumerate(u):
        r = j + _category_index(float(x), length - j)
        pool[j], pool[r] = pool[r], pool[j]
    return pool[: len(u)]


def decode_multiply_position_array(spec: ParamSpec, u: Sequence[float]) -> list:
    if spec.times > spec.length:
        raise ValueError(f"{spec.key}: times > length")
    arr = _check_unit(u, spec.times)
    return multiply_positions(_initial_array(spec), _chosen_positions(arr, spec.length), spec.n)


def decode_binary_array(spec: ParamSpec, u: Sequence[float]) -> list[list[list[int]]]:
    """``count`` one-hot matrices of shape ``rows x cols``."""
    rows, cols = spec.range
    arr = _check_unit(u, spec.count * rows)
    mats = []
    for m in range(spec.count):
        mat = []
        for r in range(rows):
            row = [0] * cols
            row[_category_index(float(arr[m * rows + r]), cols)] = 1
            mat.append(row)
        mats.append(mat)
    return mats


def encode_value(spec: ParamSpec, value: Any) -> tuple[float, ...]:
    """A representative encoding of ``value`` (inverse of :func:`decode` for scalar types)."""
    t = spec.ptype
    if t.is_categorical:
        k = len(spec.range)
        return ((list(spec.range).index(value) + 0.5) / k,)
    if t.is_interval:
        lo, hi = spec.range
        if t is ParamType.FLOAT:
            return ((value - lo) / (hi - lo) if hi > lo else 0.0,)
        if t is ParamType.FLOAT_EXP:
            return ((math.log(value) - math.log(lo)) / (math.log(hi) - math.log(lo)) if hi > lo else 0.0,)
        if t is ParamType.INT:
            return ((value - lo + 0.5) / (hi - lo + 1),)
        a, b = math.log(lo - 0.5), math.log(hi + 0.5)
        return (min(max((math.log(value) - a) / (b - a), 0.0), 1.0),)
    if t is ParamType.INT_ARRAY:
        return tuple((v - lo + 0.5) / (hi - lo + 1) for v, (lo, hi) in zip(value, spec.range))
    if t is ParamType.BINARY_ARRAY:
        cols = spec.range[1]
        return tuple((row.index(1) + 0.5) / cols for mat in value for row in mat)
    raise TypeError(f"cannot encode {t.value} values")


def decode_sample(space: SearchSpace, encoded: EncodedSample, provenance: Mapping[str, Any] | None = None) -> ConfigSample:
    """Decode every coordinate block, then drop keys left inactive by the conditions."""
    decoded: dict[str, Any] = {}
    for key in topological_order(space):
        decoded[key] = decode(space[key], encoded.coords[key])
    live = active_keys(space, decoded)
    values = {p.key: decoded[p.key] for p in space.params if p.key in live}
    # A BINARY_ARRAY sized by a sibling ``count`` param keeps only that many matrices.
    for p in space.params:
        if p.ptype is ParamType.BINARY_ARRAY and p.key in values:
            count_key = p.key.rsplit(".", 1)[0] + ".count"
            if count_key in values:
                values[p.key] = values[p.key][: int(values[count_key])]
    return ConfigSample(values, dict(provenance or {}))


def sample(space: SearchSpace, rng_seed: int, sampler: str = "uniform") -> tuple[EncodedSample, ConfigSample]:
    """Draw one point uniformly from the cube and decode it."""
    rng = make_rng(rng_seed)
    dims = [encoding_dim(p) for p in space.params]
    # One draw for the whole cube; it matches per-param draws taken in order.
    flat = rng.random(sum(dims)).tolist()
    coords, at = {}, 0
    for p, d in zip(space.params, dims):
        coords[p.key] = tuple(flat[at:at + d])
        at += d
    encoded = EncodedSample(coords)
    return encoded, decode_sample(space, encoded, {"seed": int(rng_seed), "sampler": sampler})
