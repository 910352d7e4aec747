"""RBF kernel evaluation.

The kernel is k(r) = variance * exp(-r^2 / (2 * lengthscale^2)) over Euclidean
distance r in feature space.  Hyperparameters live in log space so that
unconstrained gradient steps keep them positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

# Cap on temporary memory used by pairwise-difference buffers (float64 count).
_CHUNK_BUDGET = 8_000_000


@dataclass
class KernelParams:
    """Log-space RBF hyperparameters."""

    log_lengthscale: float = 0.0
    log_variance: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.log_lengthscale) and math.isfinite(self.log_variance)):
            raise ValidationError("kernel log-parameters must be finite")

    @property
    def lengthscale(self) -> float:
        return math.exp(self.log_lengthscale)

    @property
    def variance(self) -> float:
        return math.exp(self.log_variance)


def sq_dists(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, shape (n, m).

    Computed from explicit row differences (chunked to bound memory) rather
    than the dot-product identity: identical rows give exactly zero, so the
    gram diagonal is exactly the kernel variance.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 2:
        raise ValidationError("sq_dists expects 2-d arrays")
    if x.shape[1] != y.shape[1]:
        raise ValidationError(
            f"dimension mismatch: {x.shape[1]} vs {y.shape[1]} feature columns"
        )
    n, d = x.shape
    m = y.shape[0]
    out = np.empty((n, m), dtype=np.float64)
    rows = max(1, _CHUNK_BUDGET // max(1, m * d))
    for start in range(0, n, rows):
        stop = min(n, start + rows)
        diff = x[start:stop, None, :] - y[None, :, :]
        out[start:stop] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


def rbf(a: np.ndarray, b: np.ndarray, params: KernelParams) -> float:
    """Kernel value between two feature vectors."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValidationError(f"dimension mismatch: {a.shape} vs {b.shape}")
    diff = a - b
    r2 = float(diff @ diff)
    ell2 = math.exp(2.0 * params.log_lengthscale)
    return params.variance * math.exp(-r2 / (2.0 * ell2))


def gram(x: np.ndarray, y: np.ndarray, params: KernelParams) -> np.ndarray:
    """Kernel matrix with entry (i, j) = rbf(x_i, y_j, params)."""
    d2 = sq_dists(x, y)
    return gram_from_sq_dists(d2, params)


def gram_from_sq_dists(d2: np.ndarray, params: KernelParams) -> np.ndarray:
    """Kernel matrix from a precomputed squared-distance matrix."""
    ell2 = math.exp(2.0 * params.log_lengthscale)
    return params.variance * np.exp(d2 / (-2.0 * ell2))


def kernel_diag(n: int, params: KernelParams) -> np.ndarray:
    """Diagonal of gram(X, X) for any n points: constant kernel variance."""
    return np.full(n, params.variance, dtype=np.float64)


def median_heuristic_lengthscale(
    x: np.ndarray, rng: np.random.Generator | None = None, max_rows: int = 1024
) -> float:
    """Median pairwise distance of (a subsample of) the rows of ``x``.

    Falls back to 1.0 when the median is zero (duplicate-only input).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] > max_rows:
        if rng is None:
            rng = np.random.default_rng(0)
        idx = rng.choice(x.shape[0], size=max_rows, replace=False)
        x = x[idx]
    d2 = sq_dists(x, x)
    upper = d2[np.triu_indices(d2.shape[0], k=1)]
    if upper.size == 0:
        return 1.0
    med = float(np.sqrt(np.median(upper)))
    return med if med > 0.0 else 1.0
