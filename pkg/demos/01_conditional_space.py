"""Define a conditional search space, draw from it, and watch a condition switch a key on and off.

Run:  python3 demos/01_conditional_space.py
"""

from vega.sampler import derive_seed, sample, space_dim
from vega.space import active_keys, parse_space

SPACE = """
hyperparameters:
  - key: trainer.optim.type
    type: STRING
    range: [Adam, SGD]
  - key: trainer.optim.params.lr
    type: FLOAT_EXP
    range: [0.00001, 0.1]
  - key: trainer.optim.params.momentum
    type: FLOAT
    range: [0.0, 0.99]
  - key: dataset.batch_size
    type: INT_CAT
    range: [32, 64, 128, 256]
condition:
  - key: momentum_only_for_sgd
    child: trainer.optim.params.momentum
    parent: trainer.optim.type
    type: EQUAL
    range: [SGD]
"""


def main():
    space = parse_space(SPACE)
    print(f"{len(space)} params, {space_dim(space)} unit-cube coordinates")

    # Every draw uses all four coordinates; the momentum value is simply
    # dropped when the optimizer is Adam.
    for i in range(6):
        encoded, config = sample(space, derive_seed("demo", i))
        opt = config["trainer.optim.type"]
        momentum = config.values.get("trainer.optim.params.momentum")
        note = f"momentum={momentum:.3f}" if momentum is not None else "momentum inactive"
        print(f"  {opt:4s} lr={config['trainer.optim.params.lr']:.2e} "
              f"batch={config['dataset.batch_size']:<3d} {note}")

    base = {k: None for k in space.keys}
    for opt in ("Adam", "SGD"):
        live = sorted(active_keys(space, {**base, "trainer.optim.type": opt}))
        print(f"active with {opt}: {', '.join(live)}")


if __name__ == "__main__":
    main()
