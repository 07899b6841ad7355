"""Non-linear dynamics descriptors: Shannon entropy, Higuchi FD, multiscale PE."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class NonlinearSummary:
    shannon_entropy: float
    higuchi_fd: float
    mspe: np.ndarray
    n_scales: int


def _as_array(sig) -> np.ndarray:
    return np.asarray(getattr(sig, "samples", sig), dtype=np.float64)


def shannon_entropy(sig, n_bins: int = 64) -> float:
    """Entropy in bits of the amplitude histogram on ``[min, max]``."""
    if n_bins < 2:
        raise ValueError("n_bins must be at least 2")
    x = _as_array(sig)
    if x.size == 0:
        return float("nan")
    lo, hi = x.min(), x.max()
    if hi == lo:
        return 0.0
    # the snap keeps values lying on a bin edge in the same bin after any
    # affine rescaling, whatever the rounding of the division
    idx = np.floor((x - lo) / (hi - lo) * n_bins + 1e-9).astype(np.int64)
    counts = np.bincount(np.clip(idx, 0, n_bins - 1), minlength=n_bins)
    # sorted so the sum depends only on the multiset of counts
    p = np.sort(counts[counts > 0]) / x.size
    return float(-np.sum(p * np.log2(p)))


def higuchi_lengths(x: np.ndarray, k_max: int) -> np.ndarray:
    """Mean normalized curve length L(k) for k = 1..k_max."""
    n = x.size
    out = np.empty(k_max)
    for k in range(1, k_max + 1):
        lm = []
        for m in range(k):
            sub = x[m::k]
            n_int = sub.size - 1  # floor((N - m - 1) / k) with 0-based offset
            if n_int < 1:
                continue
            length = np.sum(np.abs(np.diff(sub))) * (n - 1) / (n_int * k)
            lm.append(length / k)
        out[k - 1] = np.mean(lm)
    return out


def higuchi_fd(sig, k_max: int = 10) -> float:
    x = _as_array(sig)
    if x.size < 10 * k_max:
        raise ValueError(f"need at least {10 * k_max} samples for k_max={k_max}")
    lengths = higuchi_lengths(x, k_max)
    if np.any(lengths <= 0):
        return 1.0
    ln_k = np.log(np.arange(1, k_max + 1))
    slope = np.polyfit(ln_k, np.log(lengths), 1)[0]
    return float(-slope)


def ordinal_patterns(x: np.ndarray, order: int, delay: int) -> np.ndarray:
    """Integer code of the ordinal pattern of every embedded vector.

    Ties rank the earlier sample first (stable sort).
    """
    n = x.size - (order - 1) * delay
    emb = np.stack([x[i * delay:i * delay + n] for i in range(order)], axis=1)
    perm = np.argsort(emb, axis=1, kind="stable")
    weights = order ** np.arange(order - 1, -1, -1)
    return perm @ weights


def permutation_entropy(sig, order: int = 3, delay: int = 1) -> float:
    """Permutation entropy normalized by ln(order!) into [0, 1]."""
    if not 3 <= order <= 5:
        raise ValueError("order must be in [3, 5]")
    if delay < 1:
        raise ValueError("delay must be >= 1")
    x = _as_array(sig)
    if x.size <= order * delay:
        return float("nan")
    codes = ordinal_patterns(x, order, delay)
    _, counts = np.unique(codes, return_counts=True)
    p = counts / counts.sum()
    h = -np.sum(p * np.log(p)) / math.log(math.factorial(order))
    return float(max(0.0, h))


def coarse_grain(x: np.ndarray, scale: int) -> np.ndarray:
    n = x.size // scale
    return x[: n * scale].reshape(n, scale).mean(axis=1)


def multiscale_pe(sig, order: int = 3, delay: int = 1, n_scales: int = 5) -> np.ndarray:
    """Permutation entropy of the coarse-grained series at scales 1..n_scales.

    Scales whose coarse series is too short are dropped, so the result may
    be shorter than ``n_scales``.
    """
    x = _as_array(sig)
    out = []
    for s in range(1, n_scales + 1):
        y = coarse_grain(x, s)
        if y.size <= order * delay:
            break
        out.append(permutation_entropy(y, order, delay))
    return np.asarray(out)


def summarize(sig, n_bins: int = 64, k_max: int = 10, order: int = 3, delay: int = 1,
              n_scales: int = 5) -> NonlinearSummary:
    """All three descriptors, NaN where the signal is too short."""
    x = _as_array(sig)
    nan = float("nan")
    h = shannon_entropy(x, n_bins) if x.size else nan
    fd = higuchi_fd(x, k_max) if x.size >= 10 * k_max else nan
    pe = multiscale_pe(x, order, delay, n_scales) if x.size else np.zeros(0)
    padded = np.full(n_scales, nan)
    padded[: pe.size] = pe
    return NonlinearSummary(h, fd, padded, int(pe.size))
