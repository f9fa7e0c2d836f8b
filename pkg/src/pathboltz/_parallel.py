"""Worker-count control and order-stable block reduction."""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor

THREADS_ENV = "PATHBOLTZ_THREADS"


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def map_blocks(fn, blocks):
    """Apply ``fn`` to each block and return the results in block order.

    Results are collected positionally, so any reduction done over the
    returned list is independent of how many workers ran.
    """
    blocks = list(blocks)
    workers = min(worker_count(), len(blocks))
    if workers <= 1:
        return [fn(b) for b in blocks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, blocks))


def complex_fsum(values) -> complex:
    """Correctly rounded sum of complex numbers (real and imaginary parts separately)."""
    values = list(values)
    return complex(math.fsum(v.real for v in values), math.fsum(v.imag for v in values))
