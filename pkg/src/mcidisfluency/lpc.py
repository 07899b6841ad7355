"""Linear prediction helpers shared by formant tracking, LPCC and PLP."""

from __future__ import annotations

import numpy as np

LOG_FLOOR = 1e-10


class LevinsonError(ArithmeticError):
    """Prediction error became non-positive during the recursion."""


def autocorr(x: np.ndarray, max_lag: int) -> np.ndarray:
    n = x.shape[-1]
    nfft = 1 << int(np.ceil(np.log2(2 * n - 1)))
    spec = np.fft.rfft(x, nfft)
    r = np.fft.irfft(spec * np.conj(spec), nfft)
    return r[..., : max_lag + 1]


def levinson(r: np.ndarray, order: int) -> tuple[np.ndarray, float]:
    """Levinson-Durbin recursion.

    Returns predictor coefficients ``a[1..p]`` in the convention
    ``x[n] ~ sum_k a[k] x[n-k]`` and the final prediction error power.
    """
    r = np.asarray(r, dtype=np.float64)
    err = r[0]
    if not err > 0:
        raise LevinsonError("zero-energy frame")
    a = np.zeros(order)
    for i in range(order):
        acc = r[i + 1] - np.dot(a[:i], r[i:0:-1])
        k = acc / err
        a_prev = a[:i].copy()
        a[i] = k
        a[:i] = a_prev - k * a_prev[::-1]
        err *= 1.0 - k * k
        if not err > 0:
            raise LevinsonError(f"prediction error non-positive at order {i + 1}")
    return a, float(err)


def lpc_to_cepstrum(a: np.ndarray, err: float, n_coeffs: int) -> np.ndarray:
    """Cepstrum of the all-pole model ``sqrt(err) / (1 - sum a_k z^-k)``."""
    p = a.shape[0]
    c = np.zeros(n_coeffs)
    c[0] = np.log(err)
    for n in range(1, n_coeffs):
        acc = a[n - 1] if n <= p else 0.0
        for k in range(max(1, n - p), n):
            acc += (k / n) * c[k] * a[n - k - 1]
        c[n] = acc
    return c


def floor_cepstrum(n_coeffs: int) -> np.ndarray:
    """Row emitted for frames with no usable prediction (silence)."""
    c = np.zeros(n_coeffs)
    c[0] = np.log(LOG_FLOOR)
    return c
