"""Importance-weight diagnostics and balanced resampling.

ess(w)  = 1 / sum w_j^2, the effective sample size in [1, N].
div(w)  = sum min(1, N w_j), the expected number of distinct members kept
          by a balanced resampling pass, also in [1, N].

balanced_resample allocates floor(N w_j) copies deterministically and fills
the remaining slots by systematic sampling over the fractional remainders,
so every count differs from N w_j by less than one.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateWeightsError

__all__ = ["normalized_weights", "weights_from_log", "ess", "div", "balanced_resample"]

# absolute slack so integer targets N*w_j survive float rounding
_FLOOR_GUARD = 1e-9


def normalized_weights(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size < 1:
        raise ValueError("weights must be a nonempty vector")
    if np.any(~np.isfinite(w)) or np.any(w < 0.0):
        raise DegenerateWeightsError("weights must be finite and nonnegative")
    total = w.sum()
    if total <= 0.0:
        raise DegenerateWeightsError("weights sum to zero")
    return w / total


def weights_from_log(logw) -> np.ndarray:
    """Normalized weights from log weights, stabilized by max subtraction."""
    logw = np.asarray(logw, dtype=float)
    if logw.size < 1:
        raise ValueError("log weights must be nonempty")
    m = np.max(logw)
    if not np.isfinite(m):
        raise DegenerateWeightsError("all log-weights underflowed")
    w = np.exp(logw - m)
    return w / w.sum()


def ess(w) -> float:
    w = normalized_weights(w)
    return float(1.0 / np.sum(w * w))


def div(w) -> float:
    w = normalized_weights(w)
    return float(np.sum(np.minimum(1.0, w.size * w)))


def balanced_resample(w, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Resampled component indices (ascending), counts within one of N w_j.

    N is `size` when given (default: one draw per weight). The leftover slots
    after the deterministic floor allocation are drawn by systematic sampling
    (a single uniform offset) over the remainders, which keeps
    E[count_j] = N w_j and count_j in {floor(N w_j), ceil(N w_j)}.
    """
    w = normalized_weights(w)
    n_out = w.size if size is None else int(size)
    if n_out < 1:
        raise ValueError("sample size must be positive")
    target = n_out * w
    counts = np.floor(target + _FLOOR_GUARD).astype(np.int64)
    short = n_out - int(counts.sum())
    if short > 0:
        resid = np.maximum(target - counts, 0.0)
        total = resid.sum()
        pos = (rng.uniform() + np.arange(short)) * (total / short)
        extra = np.searchsorted(np.cumsum(resid), pos, side="right")
        np.add.at(counts, np.minimum(extra, w.size - 1), 1)
    return np.repeat(np.arange(w.size), counts)
