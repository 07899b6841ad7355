from __future__ import annotations

import numpy as np


def knn_predict(X_train: np.ndarray, y_train: np.ndarray, X: np.ndarray, k: int = 1) -> np.ndarray:
    """Majority vote among the k nearest training points (Euclidean).

    Distance ties go to the lower training index; vote ties go to the label
    of the single nearest neighbour.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    k = min(k, X_train.shape[0])
    d2 = ((X[:, None, :] - X_train[None, :, :]) ** 2).sum(axis=2)
    order = np.argsort(d2, axis=1, kind="stable")[:, :k]
    out = np.empty(X.shape[0], dtype=np.int64)
    for r, nn in enumerate(order):
        votes = y_train[nn]
        counts = np.bincount(votes)
        winners = np.flatnonzero(counts == counts.max())
        out[r] = winners[0] if winners.size == 1 else votes[0]
    return out
