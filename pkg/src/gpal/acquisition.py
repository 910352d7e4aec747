"""Pool scoring and batch selection.

Uncertainty sampling ranks pool samples by the mean class-probability
variance; the baseline draws uniformly.  Ties break toward the lower sample
index so runs replay exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .rng import STREAM_SELECT, derive_rng
from .svgp import ClassPosterior

STRATEGY_UNCERTAINTY = "uncertainty"
STRATEGY_RANDOM = "random"
STRATEGIES = (STRATEGY_UNCERTAINTY, STRATEGY_RANDOM)


@dataclass
class AcquisitionScore:
    index: int
    score: float


@dataclass
class BatchSelection:
    indices: list[int]
    strategy: str
    cycle: int
    exhausted: bool = False  # pool was empty; the engine stops

    def __len__(self) -> int:
        return len(self.indices)


def score_uncertainty(posterior: ClassPosterior, pool: np.ndarray) -> list[AcquisitionScore]:
    """Mean per-class probability variance for each pool sample."""
    pool = np.asarray(pool, dtype=np.int64)
    if posterior.prob_var.shape[0] != pool.size:
        raise ValidationError(
            f"posterior covers {posterior.prob_var.shape[0]} samples, pool has {pool.size}"
        )
    means = posterior.prob_var.mean(axis=1)
    if not np.all(np.isfinite(means)):
        raise ValidationError("acquisition scores must be finite")
    return [AcquisitionScore(index=int(i), score=float(s)) for i, s in zip(pool, means)]


def select_top(scores: list[AcquisitionScore], batch_size: int, cycle: int = 0) -> BatchSelection:
    """The batch_size highest scores; ties broken by ascending sample index."""
    if batch_size < 1:
        raise ValidationError("batch size must be >= 1")
    if not scores:
        return BatchSelection(indices=[], strategy=STRATEGY_UNCERTAINTY, cycle=cycle, exhausted=True)
    ranked = sorted(scores, key=lambda s: (-s.score, s.index))
    chosen = [s.index for s in ranked[: min(batch_size, len(ranked))]]
    return BatchSelection(indices=chosen, strategy=STRATEGY_UNCERTAINTY, cycle=cycle)


def select_random(pool: np.ndarray, batch_size: int, seed: int, cycle: int = 0) -> BatchSelection:
    """Seeded uniform sample without replacement, deterministic per (seed, cycle)."""
    if batch_size < 1:
        raise ValidationError("batch size must be >= 1")
    pool = np.asarray(pool, dtype=np.int64)
    if pool.size == 0:
        return BatchSelection(indices=[], strategy=STRATEGY_RANDOM, cycle=cycle, exhausted=True)
    rng = derive_rng(seed, STREAM_SELECT, cycle)
    take = min(batch_size, pool.size)
    chosen = rng.choice(pool, size=take, replace=False)
    return BatchSelection(indices=[int(i) for i in chosen], strategy=STRATEGY_RANDOM, cycle=cycle)
