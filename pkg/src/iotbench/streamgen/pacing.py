"""Emission pacing against an absolute schedule."""

from __future__ import annotations

import time
from bisect import bisect_right
from typing import Callable, Sequence

COARSE_SLEEP_S = 0.001
MAX_BATCH = 256


def pace(
    ctx,
    offsets: Sequence[float],
    make: Callable[[int, int], list],
    *,
    start_ns: int | None = None,
    lookahead: float = COARSE_SLEEP_S,
    max_batch: int = MAX_BATCH,
) -> int:
    """Emit items ``i`` at wall-clock ``start + offsets[i]`` seconds.

    ``offsets`` must be non-decreasing. ``make(i, j)`` builds the messages for
    items ``i..j-1``. Waits of at least a millisecond sleep; anything due
    within the next millisecond is released early in the same batch, which
    keeps a single core free for the workers instead of spinning. Falling
    behind (backpressure) is never made up by skipping: late items go out as
    fast as downstream accepts them.

    Returns the number of items emitted before a stop request.
    """
    clock = ctx.clock
    t0 = ctx.start_ns if start_ns is None else start_ns
    n = len(offsets)
    i = 0
    while i < n:
        if ctx.should_stop():
            break
        now = (clock() - t0) / 1e9
        j = bisect_right(offsets, now + lookahead, i, min(n, i + max_batch))
        if j > i:
            ctx.emit(make(i, j))
            i = j
            continue
        wait = offsets[i] - now
        if wait >= COARSE_SLEEP_S:
            if ctx.wait(wait - lookahead * 0.5):
                break
        else:
            time.sleep(0)
    return i


def max_rate(ctx, make: Callable[[int, int], list], total: int | None = None, batch: int = MAX_BATCH) -> int:
    """Emit as fast as downstream accepts, until stopped or ``total`` items."""
    i = 0
    while total is None or i < total:
        if ctx.should_stop():
            break
        j = i + batch if total is None else min(total, i + batch)
        ctx.emit(make(i, j))
        i = j
    return i
