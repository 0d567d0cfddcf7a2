"""Worker process: ``python -m vega.dispatch.worker --evaluator '{"kind": "analytic"}'``.

Reads task lines on stdin, writes result and heartbeat lines on stdout and
exits on a shutdown message or end of input.
"""

from __future__ import annotations

import argparse
import json
import sys
import threading
from typing import IO

from . import protocol
from .evaluators import evaluate, make_evaluator


def serve(evaluator, stdin: IO[str], stdout: IO[str], worker_id: str = "w0",
          heartbeat_interval: float = 5.0) -> int:
    lock = threading.Lock()
    stop = threading.Event()

    def send(msg: dict) -> None:
        with lock:
            stdout.write(protocol.encode(msg))
            stdout.flush()

    def beat() -> None:
        while not stop.wait(heartbeat_interval):
            send(protocol.heartbeat_message(worker_id))

    if heartbeat_interval > 0:
        threading.Thread(target=beat, daemon=True).start()
    send(protocol.heartbeat_message(worker_id))
    try:
        for line in stdin:
            if not line.strip():
                continue
            try:
                msg = protocol.decode(line)
            except protocol.ProtocolError as exc:
                print(f"worker {worker_id}: {exc}", file=sys.stderr)
                continue
            if msg["type"] == "shutdown":
                break
            if msg["type"] != "task":
                continue
            result = evaluate(evaluator, msg["sample"], msg["resource"], msg["seed"], trial_id=msg["trial_id"],
                              attempt=msg["attempt"], model_desc=msg.get("model_desc"))
            send(protocol.result_message(result))
    finally:
        stop.set()
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="python -m vega.dispatch.worker")
    parser.add_argument("--evaluator", default='{"kind": "analytic"}', help="evaluator config as JSON")
    parser.add_argument("--worker-id", default="w0")
    parser.add_argument("--heartbeat", type=float, default=5.0, help="heartbeat interval in seconds")
    args = parser.parse_args(argv)
    evaluator = make_evaluator(json.loads(args.evaluator))
    return serve(evaluator, sys.stdin, sys.stdout, args.worker_id, args.heartbeat)


if __name__ == "__main__":
    sys.exit(main())
