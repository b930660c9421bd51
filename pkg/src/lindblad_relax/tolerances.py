"""Numerical tolerances shared by all modules."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace


@dataclass(frozen=True)
class Tolerances:
    herm: float = 1e-10
    orth: float = 1e-10
    trace: float = 1e-9
    psd: float = 1e-8
    tp: float = 1e-10
    comm: float = 1e-10
    # relative singular-value cut for nullspace dimension
    sigma_cut: float = 1e-8
    # Lambda(t) must be below -lambda_neg to count as strictly negative
    lambda_neg: float = 1e-10
    envelope: float = 1e-8
    # local error per adaptive step
    integrator: float = 1e-9

    def override(self, **kwargs) -> "Tolerances":
        known = {f.name for f in fields(self)}
        unknown = set(kwargs) - known
        if unknown:
            raise KeyError(f"unknown tolerance(s): {sorted(unknown)}")
        return replace(self, **{k: float(v) for k, v in kwargs.items()})


DEFAULT = Tolerances()


def max_workers() -> int:
    """Worker cap from ``LINDBLAD_RELAX_THREADS`` (default 1)."""
    raw = os.environ.get("LINDBLAD_RELAX_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def parallel_map(fn, items):
    """Ordered map, threaded when ``LINDBLAD_RELAX_THREADS`` > 1."""
    items = list(items)
    workers = min(max_workers(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
