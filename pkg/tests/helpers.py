"""Space generators and search drivers shared by property and acceptance tests."""

from __future__ import annotations

import itertools
import math
import random

from vega.sampler import EncodedSample, decode_sample, encode_value, make_rng
from vega.search import (
    AshaSearch,
    AshaState,
    EvolutionSearch,
    Objective,
    Promote,
    TrialResult,
    asha_on_result,
    next_promotion,
)
from vega.space import ConditionSpec, ConditionType, ParamSpec, ParamType, SearchSpace, space_from_dict

JOINT_SPACE = """
search_space:
  type: SearchSpace
  hyperparameters:
    - key: dataset.batch_size
      type: INT_CAT
      range: [8, 16, 32, 64, 128, 256]
    - key: dataset.transformers
      type: STRING
      range: ['Cutout', 'Rotate', 'Brightness', 'Color']
    - key: trainer.optim.params.lr
      type: FLOAT_EXP
      range: [0.00001, 0.1]
    - key: trainer.optim.type
      type: STRING
      range: ['Adam', 'SGD']
    - key: trainer.optim.params.momentum
      type: FLOAT
      range: [0.0, 0.99]
    - key: network.custom.G1_nodes
      type: INT
      range: [3, 10]
    - key: network.custom.G1_K
      type: INT
      range: [2, 5]
    - key: network.custom.G1_P
      type: FLOAT
      range: [0.1, 1.0]
  condition:
    - key: condition_for_sgd_momentum
      child: trainer.optim.params.momentum
      parent: trainer.optim.type
      type: EQUAL
      range: ["SGD"]
"""


def discrete_values(p: ParamSpec) -> list:
    if p.ptype is ParamType.INT:
        return list(range(p.range[0], p.range[1] + 1))
    return list(p.range)


def random_discrete_space(rng: random.Random, max_params: int = 4, max_conditions: int = 3) -> SearchSpace:
    """A valid space of small discrete params with a random condition DAG."""
    n = rng.randint(1, max_params)
    params = []
    for i in range(n):
        kind = rng.choice([ParamType.INT_CAT, ParamType.STRING, ParamType.INT])
        if kind is ParamType.INT_CAT:
            rng_values = tuple(sorted(rng.sample(range(10), rng.randint(1, 4))))
        elif kind is ParamType.STRING:
            rng_values = tuple(rng.sample(["a", "b", "c", "d"], rng.randint(1, 4)))
        else:
            lo = rng.randint(0, 3)
            rng_values = (lo, lo + rng.randint(0, 3))
        params.append(ParamSpec(f"p{i}", kind, rng_values))
    conditions = []
    children = list(range(1, n))
    rng.shuffle(children)
    for child in children[: rng.randint(0, min(max_conditions, n - 1))]:
        parent = params[rng.randrange(child)]
        values = discrete_values(parent)
        ctype = rng.choice(list(ConditionType))
        picked = tuple(rng.sample(values, rng.randint(1, len(values))))
        conditions.append(ConditionSpec(f"c{child}", params[child].key, parent.key, ctype, picked))
    return SearchSpace(tuple(params), tuple(conditions))


def joint_assignments(space: SearchSpace):
    keys = [p.key for p in space.params]
    for combo in itertools.product(*(discrete_values(p) for p in space.params)):
        yield dict(zip(keys, combo))


def as_tuples(space: SearchSpace) -> list[tuple]:
    return [(c.child, c.parent, c.ctype.value, tuple(c.range)) for c in space.conditions]


# ---- search drivers shared with the acceptance suite


def one_param(ptype, rng, key="x"):
    return space_from_dict({"hyperparameters": [{"key": key, "type": ptype, "range": list(rng)}]})


UNIT = one_param("FLOAT", [0.0, 1.0], "u")


def ok(tid, score):
    return TrialResult(tid, {"score": score})


def fuzz_asha_stream(seed, eta, n):
    """Feed random scores through single-rung ASHA, checking each promotion when it happens."""
    rng = random.Random(seed)
    state = AshaState(eta=eta, r0=1, max_rungs=2)
    promoted_once = set()
    for tid in range(n):
        state.register(tid)
        score = rng.choice([rng.random(), round(rng.random(), 1), -math.inf])
        decision = asha_on_result(state, ok(tid, score) if score > -math.inf else TrialResult(tid, status="failed"))
        pending = [decision] if isinstance(decision, Promote) else []
        while (p := next_promotion(state)) is not None:
            pending.append(p)
        for p in pending:
            entries = state.rungs[0]
            k = len(entries) // eta
            ranked = sorted(entries, key=lambda e: (-e[1], e[0]))[:k]
            assert p.trial_id in {t for t, _ in ranked}
            assert math.isfinite(dict(entries)[p.trial_id])
            assert p.trial_id not in promoted_once
            promoted_once.add(p.trial_id)
    assert state.promoted[0] == promoted_once


def stable_curve(x, r):
    # Every curve has the same shape, so rankings agree at every resource.
    return (0.5 + 0.5 * math.sin(7.0 * x) ** 2) * (1.0 - math.exp(-r / 3.0))


def crossing_curve(x, r):
    # Slow starters overtake early leaders at large r.
    final = 0.5 + 0.5 * math.sin(7.0 * x) ** 2
    speed = 0.5 + 3.0 * x
    return final * (1.0 - math.exp(-r / speed))


def run_single_worker_asha(space, samples, objective, eta, rungs):
    search = AshaSearch(space, eta=eta, r0=1, max_rungs=rungs, samples=samples)
    while (trial := search.ask()) is not None:
        search.tell(trial, ok(trial.trial_id, objective(trial.sample["u"], trial.resource)))
    return search


def fixed_unit_samples(seed, n=81):
    samples = []
    for x in make_rng(seed).random(n):
        enc = EncodedSample({"u": encode_value(UNIT["u"], float(x))})
        samples.append((enc, decode_sample(UNIT, enc)))
    return samples, [s[1]["u"] for s in samples]


def run_bi_objective_ea(seed, evaluations=500):
    space = one_param("INT", [0, 32], "i")
    search = EvolutionSearch(space, [Objective("f1", "min"), Objective("f2", "min")], seed=seed,
                             population=8, mutation_rate=0.2, num_samples=evaluations)
    while (t := search.ask()) is not None:
        u = t.sample["i"] / 32
        search.tell(t, TrialResult(t.trial_id, {"f1": u, "f2": 1 - u * u}))
    return search.archive
