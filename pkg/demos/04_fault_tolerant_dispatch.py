"""Run 100 trials on four threaded workers while one of them dies mid-run.

The dead worker's trial times out, is requeued, and finishes elsewhere.
The search still sees every trial exactly once.

Run:  python3 demos/04_fault_tolerant_dispatch.py
"""

import logging

from vega.dispatch import AnalyticEvaluator, Master, ThreadPool
from vega.search import RandomSearch
from vega.space import space_from_dict


class CountingSearch(RandomSearch):
    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.told = []

    def tell(self, trial, result):
        self.told.append(trial.trial_id)
        super().tell(trial, result)


def main():
    logging.basicConfig(level=logging.WARNING, format="  log: %(message)s")
    space = space_from_dict({"hyperparameters": [
        {"key": "x1", "type": "FLOAT", "range": [-5, 10]},
        {"key": "x2", "type": "FLOAT", "range": [0, 15]},
    ]})
    search = CountingSearch(space, seed=0, num_samples=100)
    pool = ThreadPool(AnalyticEvaluator("branin", delay=0.002), 4, heartbeat_interval=0.05,
                      fail_after={"w2": 10})
    history = Master(search, pool, timeout=0.3, max_retries=2, heartbeat_interval=0.05,
                     poll_interval=0.01).run()

    states = {slot.worker_id: slot.state for slot in pool.slots}
    print("worker states:", states)
    print(f"results: {len(history)}, distinct trials told: {len(set(search.told))}, "
          f"repeats: {len(search.told) - len(set(search.told))}")
    retried = [r.trial_id for _, r in history if r.attempt > 0]
    print("trials that needed a retry:", retried)
    best = min(history, key=lambda tr: tr[1].metrics["loss"])
    print(f"best branin value {best[1].metrics['loss']:.4f} at "
          f"({best[0].sample['x1']:.3f}, {best[0].sample['x2']:.3f})")


if __name__ == "__main__":
    main()
