"""Batched Monte Carlo with reproducible substreams."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .models import stream


@dataclass(frozen=True)
class MonteCarloSpec:
    samples: int = 1_000_000
    seed: int = 0
    batch: int = 1 << 16
    workers: int = 1

    def __post_init__(self):
        if self.samples <= 0 or self.batch <= 0:
            raise ValueError("samples and batch must be positive")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def batches(self) -> list[tuple[int, int]]:
        """``(stream id, size)`` pairs; they depend on ``samples`` and ``batch`` only."""
        full, rest = divmod(self.samples, self.batch)
        out = [(i, self.batch) for i in range(full)]
        if rest:
            out.append((full, rest))
        return out


def run_batches(spec: MonteCarloSpec, work):
    """Evaluate ``work(rng, size)`` for every batch; results come back in batch order."""
    jobs = spec.batches()

    def one(job):
        sid, size = job
        return work(stream(spec.seed, sid), size)

    if spec.workers == 1:
        return [one(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=spec.workers) as pool:
        return list(pool.map(one, jobs))


def merge_moments(parts):
    """Combine per-batch ``(count, mean, m2)`` triples (Chan et al.) in the given order."""
    n = 0
    mean = 0.0
    m2 = 0.0
    for nb, mb, qb in parts:
        if nb == 0:
            continue
        tot = n + nb
        delta = mb - mean
        mean += delta * nb / tot
        m2 += qb + delta * delta * n * nb / tot
        n = tot
    return n, mean, m2


def batch_spread(parts, mean: float) -> float:
    """Largest ``|batch mean - mean|`` in units of that batch mean's standard error."""
    worst = 0.0
    for nb, mb, qb in parts:
        if nb < 2:
            continue
        se = np.sqrt(qb / (nb - 1) / nb)
        if se > 0:
            worst = max(worst, abs(mb - mean) / se)
        elif mb != mean:
            worst = np.inf
    return float(worst)
