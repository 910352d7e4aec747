"""Dense linear-algebra primitives for the sparse GP.

Factorization and triangular solves are delegated to numpy/scipy LAPACK
wrappers; this module owns the jitter policy and the whitened Gaussian KL.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import NumericalError, ValidationError

# Jitter ladder: relative to the mean diagonal, escalating tenfold.
JITTER_START = 1e-8
JITTER_STOP = 1e-2


@dataclass
class CholeskyFactor:
    """Lower-triangular factor L with L @ L.T equal to the source matrix."""

    lower: np.ndarray
    jitter: float

    @property
    def order(self) -> int:
        return self.lower.shape[0]


def cholesky(a: np.ndarray, jitter: float = 0.0) -> CholeskyFactor:
    """Factor a symmetric matrix after adding ``jitter`` to its diagonal."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError("cholesky expects a square matrix")
    if jitter < 0.0:
        raise ValidationError("jitter must be non-negative")
    m = a.shape[0]
    try:
        lower = np.linalg.cholesky(a + jitter * np.eye(m))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"cholesky failed at jitter {jitter:g}: {exc}") from exc
    return CholeskyFactor(lower=lower, jitter=jitter)


def cholesky_with_ladder(a: np.ndarray) -> CholeskyFactor:
    """Factor with escalating relative jitter; raise after the ladder fails.

    Starts at JITTER_START * mean(diag) and multiplies by 10 up to
    JITTER_STOP * mean(diag).  The attempted levels are carried in the error.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError("cholesky expects a square matrix")
    scale = float(np.mean(np.diag(a)))
    if not np.isfinite(scale) or scale <= 0.0:
        scale = 1.0
    attempted = []
    level = JITTER_START
    while level <= JITTER_STOP * (1.0 + 1e-12):
        jitter = level * scale
        attempted.append(jitter)
        try:
            return cholesky(a, jitter=jitter)
        except NumericalError:
            level *= 10.0
    raise NumericalError(
        "matrix not positive definite after jitter ladder "
        + ", ".join(f"{j:.3e}" for j in attempted)
    )


def tri_solve(factor: CholeskyFactor, b: np.ndarray, side: str = "lower") -> np.ndarray:
    """Solve L @ X = B (side="lower") or L.T @ X = B (side="lower-transpose")."""
    if side not in ("lower", "lower-transpose"):
        raise ValidationError(f"unknown side {side!r}")
    b = np.asarray(b, dtype=np.float64)
    squeeze = b.ndim == 1
    if squeeze:
        b = b[:, None]
    if b.shape[0] != factor.order:
        raise ValidationError(
            f"shape mismatch: factor order {factor.order}, rhs rows {b.shape[0]}"
        )
    x = solve_triangular(factor.lower, b, lower=True, trans="T" if side == "lower-transpose" else "N")
    return x[:, 0] if squeeze else x


def gauss_kl_whitened(m: np.ndarray, l_s: np.ndarray) -> float:
    """KL(N(m, L_S L_S^T) || N(0, I)) for a lower-triangular L_S.

    Closed form: 0.5 * (|m|^2 + tr(L_S L_S^T) - M - 2 * sum(log diag L_S)).
    """
    m = np.asarray(m, dtype=np.float64).ravel()
    l_s = np.asarray(l_s, dtype=np.float64)
    order = m.shape[0]
    if l_s.shape != (order, order):
        raise ValidationError(f"L_S must be {order}x{order}, got {l_s.shape}")
    if np.any(np.triu(l_s, k=1) != 0.0):
        raise ValidationError("L_S must be lower-triangular")
    diag = np.diag(l_s)
    if np.any(diag <= 0.0):
        raise ValidationError("L_S diagonal must be strictly positive")
    return 0.5 * float(m @ m + np.sum(l_s * l_s) - order - 2.0 * np.sum(np.log(diag)))
