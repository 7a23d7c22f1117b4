"""Deterministic parallel Monte Carlo execution.

Replications are grouped into fixed-size blocks.  Block ``k`` draws from its
own generator seeded by ``SeedSequence(seed, spawn_key=(*stream, k))``, so the
random numbers a replication sees depend only on (seed, stream, index) and
never on how blocks are spread over threads.  Per-block sums are reduced in
block order with ``math.fsum``, which makes the final estimate bit-identical
for any worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

BLOCK_SIZE = 1 << 15
Z95 = 1.959963984540054


def default_threads() -> int:
    raw = os.environ.get("MODDEV_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ValidationError(f"MODDEV_THREADS must be an integer, got {raw!r}") from None
    return 1


def block_rng(seed: int, stream: tuple, block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream) + (int(block),))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class BlockStats:
    count: int
    total: float
    total_sq: float
    nonzero: int
    max_value: float


def _stats(values: np.ndarray) -> BlockStats:
    values = np.asarray(values, dtype=float)
    return BlockStats(
        count=len(values),
        total=float(np.sum(values)),
        total_sq=float(np.sum(values * values)),
        nonzero=int(np.count_nonzero(values)),
        max_value=float(values.max()) if len(values) else 0.0,
    )


def run_blocks(kernel, samples: int, seed: int, stream=(), threads: int | None = None, block_size=BLOCK_SIZE):
    """Evaluate ``kernel(rng, size) -> values`` over ``samples`` replications.

    Returns the list of per-block statistics in block order.
    """
    if samples < 1:
        raise ValidationError("samples must be positive")
    if seed is None:
        raise ValidationError("a seed is required for Monte Carlo runs")
    threads = default_threads() if threads is None else max(1, int(threads))
    nblocks = -(-samples // block_size)
    sizes = [block_size] * (nblocks - 1) + [samples - block_size * (nblocks - 1)]

    def job(k):
        return _stats(kernel(block_rng(seed, stream, k), sizes[k]))

    if threads == 1 or nblocks == 1:
        return [job(k) for k in range(nblocks)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(job, range(nblocks)))


@dataclass(frozen=True)
class EstimateReport:
    p_hat: float
    std_err: float
    ci95: tuple
    samples: int
    method: str
    ess: float | None = None
    max_weight: float | None = None
    hits: int = 0
    ci_unreliable: bool = False
    vr_factor: float | None = None
    seed: int | None = None
    extra: dict = field(default_factory=dict)

    @property
    def variance(self) -> float:
        """Per-replication variance of the estimator's summand."""
        return self.std_err**2 * self.samples

    @property
    def rel_err(self) -> float:
        return self.std_err / self.p_hat if self.p_hat > 0 else math.inf

    def to_json(self) -> dict:
        out = {
            "method": self.method,
            "p_hat": self.p_hat,
            "std_err": self.std_err,
            "ci_lo": self.ci95[0],
            "ci_hi": self.ci95[1],
            "samples": self.samples,
            "hits": self.hits,
            "ess": self.ess,
            "ci_unreliable": self.ci_unreliable,
            "seed": self.seed,
        }
        if self.max_weight is not None:
            out["max_weight"] = self.max_weight
        if self.vr_factor is not None:
            out["vr_factor"] = self.vr_factor
        out.update(self.extra)
        return out


def summarize(blocks, method: str, seed=None, weighted: bool = False) -> EstimateReport:
    """Combine block statistics into a mean, standard error and normal 95% CI."""
    n = sum(b.count for b in blocks)
    total = math.fsum(b.total for b in blocks)
    total_sq = math.fsum(b.total_sq for b in blocks)
    hits = sum(b.nonzero for b in blocks)
    mean = total / n
    var = max(total_sq / n - mean * mean, 0.0)
    se = math.sqrt(var / n)
    ci = (mean - Z95 * se, mean + Z95 * se)
    ess = None
    max_w = None
    unreliable = False
    if weighted:
        ess = total * total / total_sq if total_sq > 0 else 0.0
        max_w = max(b.max_value for b in blocks)
    else:
        unreliable = mean < 10.0 / n
    return EstimateReport(
        p_hat=mean,
        std_err=se,
        ci95=ci,
        samples=n,
        method=method,
        ess=ess,
        max_weight=max_w,
        hits=hits,
        ci_unreliable=unreliable,
        seed=seed,
    )
