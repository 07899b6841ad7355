"""Linear soft-margin SVM trained with sequential minimal optimization.

Working pairs are chosen by maximal KKT violation (first-order selection)
over a precomputed linear kernel, so training is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SMOConvergenceError(RuntimeError):
    def __init__(self, iterations: int, gap: float):
        super().__init__(f"SMO did not converge after {iterations} iterations (gap {gap:.3g})")
        self.iterations = iterations
        self.gap = gap


@dataclass
class LinearSVM:
    w: np.ndarray
    b: float
    alpha: np.ndarray
    iterations: int

    def decision(self, X) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.w + self.b


def smo_train(X, y, C: float = 1.0, tol: float = 1e-3, max_iters: int = 100_000) -> LinearSVM:
    """Fit ``sign(w.x + b)`` to labels ``y`` in {-1, +1}."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if set(np.unique(y)) - {-1.0, 1.0}:
        raise ValueError("labels must be -1/+1")
    n = y.size
    K = X @ X.T
    Q = (y[:, None] * y[None, :]) * K
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of 0.5 a'Qa - e'a
    tau = 1e-12

    it = 0
    gap = np.inf
    while True:
        yg = -y * grad
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            gap = 0.0
            break
        i = int(np.flatnonzero(up)[np.argmax(yg[up])])
        j = int(np.flatnonzero(low)[np.argmin(yg[low])])
        gap = yg[i] - yg[j]
        if gap <= tol:
            break
        if it >= max_iters:
            raise SMOConvergenceError(it, gap)
        it += 1

        # analytic two-variable update along y_i a_i + y_j a_j = const
        quad = max(K[i, i] + K[j, j] - 2.0 * K[i, j], tau)
        delta = gap / quad  # step in the y-weighted direction
        # bounds: a_i += y_i * t, a_j -= y_j * t with 0 <= a <= C
        t_max_i = C - alpha[i] if y[i] > 0 else alpha[i]
        t_max_j = alpha[j] if y[j] > 0 else C - alpha[j]
        t = min(delta, t_max_i, t_max_j)
        di = y[i] * t
        dj = -y[j] * t
        alpha[i] += di
        alpha[j] += dj
        grad += Q[:, i] * di + Q[:, j] * dj
        # snap to the box to avoid drift
        for k in (i, j):
            if alpha[k] < 1e-14:
                alpha[k] = 0.0
            elif alpha[k] > C - 1e-14:
                alpha[k] = C

    w = (alpha * y) @ X
    b = _bias(alpha, y, grad, C)
    return LinearSVM(w=w, b=b, alpha=alpha, iterations=it)


def _bias(alpha, y, grad, C):
    yg = -y * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        return float(np.mean(yg[free]))
    up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
    hi = yg[up].max() if up.any() else 0.0
    lo = yg[low].min() if low.any() else 0.0
    return float((hi + lo) / 2.0)


def kkt_violations(model: LinearSVM, X, y, C: float) -> np.ndarray:
    """Per-sample violation of the soft-margin KKT conditions."""
    m = np.asarray(y, dtype=np.float64) * model.decision(X)
    a = model.alpha
    v = np.where(a <= 0, np.maximum(0.0, 1.0 - m),
                 np.where(a >= C, np.maximum(0.0, m - 1.0), np.abs(m - 1.0)))
    return v
