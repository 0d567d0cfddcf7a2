"""Tune a learning rate with asynchronous successive halving.

The evaluator is a stand-in for training: accuracy peaks at lr = 1e-2 and
its noise shrinks as more epochs are spent.  Most trials stop at one epoch;
only the promising ones are promoted to 3 and then 9.

Run:  python3 demos/02_asha_learning_rate.py
"""

from collections import Counter

from vega.dispatch import AnalyticEvaluator, InlinePool, Master
from vega.search import AshaSearch, Objective
from vega.space import space_from_dict


def main():
    space = space_from_dict({"hyperparameters": [
        {"key": "trainer.optim.params.lr", "type": "FLOAT_EXP", "range": [1e-5, 1e-1]},
    ]})
    search = AshaSearch(space, seed=1, eta=3, r0=1, max_rungs=3, objective=Objective("accuracy", "max"))
    evaluator = AnalyticEvaluator("lr_peak", noise=0.01, learning_curve=3)
    history = Master(search, InlinePool(evaluator), max_trials=60).run()

    per_rung = Counter(trial.resource for trial, _ in history)
    print("trials per epoch budget:", dict(sorted(per_rung.items())))
    spent = sum(trial.resource for trial, _ in history)
    print(f"epochs spent: {spent} (a full-budget random search of the same size: {60 * 9})")

    best = search.best()
    print(f"best lr {best.sample['trainer.optim.params.lr']:.4g} at {best.resource} epochs")


if __name__ == "__main__":
    main()
