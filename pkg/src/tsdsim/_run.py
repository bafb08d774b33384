"""Deterministic trial mapping, optionally over a process pool.

Each trial draws from its own RNG substream and results are concatenated in
trial order, so the numeric output is identical for any worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor


def resolve_workers(requested=1):
    """Worker count, with the TSD_WORKERS environment variable taking priority."""
    env = os.environ.get("TSD_WORKERS")
    if env is not None:
        return max(1, int(env))
    return max(1, int(requested))


def _run_range(ctx_fn, trial_fn, args, start, stop):
    ctx = ctx_fn(args)
    return [trial_fn(t, args, ctx) for t in range(start, stop)]


def map_trials(ctx_fn, trial_fn, args, n_trials, workers=1):
    """Run trial_fn(t, args, ctx) for t in [0, n_trials), in trial order.

    ctx_fn(args) builds per-worker shared state (factor caches) once per
    contiguous trial range; args must be picklable when workers > 1.
    """
    n_trials = int(n_trials)
    workers = min(max(1, int(workers)), max(1, n_trials))
    if workers == 1:
        return _run_range(ctx_fn, trial_fn, args, 0, n_trials)
    bounds = [n_trials * k // workers for k in range(workers + 1)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(_run_range, ctx_fn, trial_fn, args, bounds[k], bounds[k + 1])
            for k in range(workers)
        ]
        out = []
        for fut in futures:
            out.extend(fut.result())
    return out
