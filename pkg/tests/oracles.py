"""Reference implementations written independently of the package.

Each function re-derives a result straight from the rule definitions,
without calling into the code under test, so agreement is meaningful.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def brute_force_active(params, conditions, assignment):
    """Active keys by recursive literal evaluation of every condition rule.

    ``conditions`` is a list of ``(child, parent, ctype, values)`` tuples.
    """
    by_child = {c[0]: c for c in conditions}

    def active(key, depth=0):
        if depth > len(params):
            raise RecursionError("cycle")
        if key not in by_child:
            return True
        _, parent, ctype, values = by_child[key]
        if not active(parent, depth + 1):
            return False
        v = assignment[parent]
        hit = False
        for r in values:
            if isinstance(r, tuple):
                hit = hit or (r[0] <= v <= r[1])
            else:
                hit = hit or (v == r)
        if ctype == "EQUAL":
            return hit
        if ctype == "NOT_EQUAL":
            return not hit
        if ctype == "IN":
            return hit
        if ctype == "FORBIDDEN":
            return not hit
        raise ValueError(ctype)

    return {p for p in params if active(p)}


def successive_halving(configs, objective, eta, r0, rungs):
    """Synchronous successive halving; returns the index of the winner.

    ``objective(index, resource)`` is higher-is-better; ties go to the lower
    index, matching the documented tie rule.
    """
    alive = list(range(len(configs)))
    for rung in range(rungs):
        resource = r0 * eta**rung
        scored = sorted(alive, key=lambda i: (-objective(i, resource), i))
        if rung == rungs - 1:
            return scored[0]
        alive = scored[: max(1, len(alive) // eta)]
    return alive[0]


def nondominated_filter(points, orientation):
    """O(n^2) filter; duplicates of a nondominated point are kept once."""
    sign = [1 if o == "min" else -1 for o in orientation]

    def dom(a, b):
        a = [s * x for s, x in zip(sign, a)]
        b = [s * x for s, x in zip(sign, b)]
        return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))

    keep = []
    for p in points:
        if not any(dom(q, p) for q in points) and tuple(p) not in keep:
            keep.append(tuple(p))
    return set(keep)


def dnet_codes_by_filtering(vocab, ratios, max_stem):
    """All valid DNet codes: generate every tuple, then keep those passing the rules."""
    codes = set()
    for k in range(1, max_stem + 1):
        nodes = range(k + 2)
        pairs = [(a, b) for a in nodes for b in nodes if a < b]
        for ops in itertools.product(range(vocab), repeat=k):
            for r in range(ratios):
                for mask in range(1 << len(pairs)):
                    chosen = [pairs[i] for i in range(len(pairs)) if mask >> i & 1]
                    for letters in itertools.product("AC", repeat=len(chosen)):
                        skips = list(zip(chosen, letters))
                        if any(b - a < 2 for (a, b), _ in skips):
                            continue
                        if any((a, b) == (0, k + 1) for (a, b), _ in skips):
                            continue
                        merge_at = {}
                        ok = True
                        for (a, b), m in skips:
                            if merge_at.setdefault(b, m) != m:
                                ok = False
                        if not ok or merge_at.get(k + 1) == "C":
                            continue
                        text = f"S{k}:{'-'.join(map(str, ops))}_R:{r}"
                        if skips:
                            text += "_K:" + "".join(f"({a},{b}){m}" for (a, b), m in sorted(skips))
                        codes.add(text)
    return codes


def log_uniform_cdf(x, lo, hi):
    """Works on scalars and numpy arrays alike."""
    return (np.log(x) - math.log(lo)) / (math.log(hi) - math.log(lo))


def conv_params(k, cin, cout, groups=1):
    return k * k * cin * cout // groups


def branin(x1, x2):
    return (x2 - 5.1 / (4 * math.pi**2) * x1**2 + 5 / math.pi * x1 - 6) ** 2 + 10 * (1 - 1 / (8 * math.pi)) * math.cos(x1) + 10
