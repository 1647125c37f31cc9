"""
Seeded sample batches for randomized checks.

A seed is split into one child generator per batch with numpy's SeedSequence,
so a report depends only on (seed, samples, batch_size) and never on the
number of worker threads.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Tuple, Union

import numpy as np

from app.config import Settings

logger = logging.getLogger(__name__)

BatchCheck = Callable[[np.random.Generator, int], Union[float, Tuple[float, ...]]]


def batch_sizes(samples: int, batch_size: int) -> List[int]:
    if samples <= 0:
        return []
    full, rest = divmod(samples, max(1, batch_size))
    return [batch_size] * full + ([rest] if rest else [])


def batch_generators(seed: int, count: int) -> List[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


def run_batched(
    settings: Settings,
    check: BatchCheck,
    seed: Optional[int] = None,
    samples: Optional[int] = None,
) -> Union[float, Tuple[float, ...]]:
    """Run `check(rng, size)` over seeded batches and return the max residual.

    Checks returning tuples are reduced elementwise.
    """
    seed = settings.default_seed if seed is None else seed
    samples = settings.default_samples if samples is None else samples
    sizes = batch_sizes(samples, settings.batch_size)
    rngs = batch_generators(seed, len(sizes))
    if not sizes:
        return 0.0

    if settings.workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=settings.workers) as pool:
            residuals = list(pool.map(check, rngs, sizes))
    else:
        residuals = [check(rng, size) for rng, size in zip(rngs, sizes)]

    logger.debug(f"Ran {samples} samples in {len(sizes)} batches (seed={seed})")
    results = np.asarray(residuals, dtype=np.float64)
    if results.ndim == 1:
        return float(results.max())
    return tuple(float(v) for v in results.max(axis=0))
