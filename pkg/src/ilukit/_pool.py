"""Thread pool shim for the nogil kernels.

Kernels release the GIL, so plain threads give real concurrency. A worker
count of 1 runs inline: identical code path, no thread overhead, and spin
waits trivially satisfied because program order covers every dependency.
"""

from __future__ import annotations

import threading

__all__ = ["run_parallel"]


def run_parallel(nworkers: int, target, *args) -> None:
    """Run target(worker_id, nworkers, *args) on nworkers threads, join all.

    Exceptions from workers are re-raised in the caller (first worker id
    wins) after every thread has exited, so shared state is quiescent.
    """
    if nworkers < 1:
        raise ValueError("worker count must be >= 1")
    if nworkers == 1:
        target(0, 1, *args)
        return
    errors: list = [None] * nworkers

    def run(wid: int) -> None:
        try:
            target(wid, nworkers, *args)
        except BaseException as exc:  # pragma: no cover - surfaced below
            errors[wid] = exc

    threads = [threading.Thread(target=run, args=(w,)) for w in range(nworkers)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for exc in errors:
        if exc is not None:
            raise exc
