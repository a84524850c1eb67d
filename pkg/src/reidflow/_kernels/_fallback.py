"""NumPy/SciPy implementations of the hot kernels.

Used when the compiled extension is unavailable (or disabled via the
REIDFLOW_PURE environment variable).  Both backends implement the same
contract; see `reidflow._kernels` for the selection logic.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

BACKEND = "python"


def pairwise_distances(x: np.ndarray, y: np.ndarray, metric: str) -> np.ndarray:
    """Dense distance matrix between the rows of `x` and `y`.

    metric "euclidean": plain L2 distance.
    metric "cosine": 1 - cos(x, y), clipped to [0, 2].  Zero vectors get
    distance 1 to any non-zero vector and 0 to another zero vector.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 2 or x.shape[1] != y.shape[1]:
        raise ValueError("inputs must be 2-D with matching width")
    if metric == "euclidean":
        return cdist(x, y, "euclidean")
    if metric == "cosine":
        nx = np.linalg.norm(x, axis=1)
        ny = np.linalg.norm(y, axis=1)
        xs = np.divide(x, nx[:, None], out=np.zeros_like(x), where=nx[:, None] > 0)
        ys = np.divide(y, ny[:, None], out=np.zeros_like(y), where=ny[:, None] > 0)
        d = np.clip(1.0 - xs @ ys.T, 0.0, 2.0)
        both_zero = np.outer(nx == 0, ny == 0)
        if both_zero.any():
            d[both_zero] = 0.0
        return d
    raise ValueError(f"unknown metric {metric!r}")


def knn_mean_from_matrix(d: np.ndarray, k: int) -> np.ndarray:
    """Per-row mean of the k smallest off-diagonal entries of a square matrix.

    The diagonal (self distance) is excluded from every row's neighbour pool.
    """
    d = np.asarray(d, dtype=np.float64)
    n = d.shape[0]
    if d.ndim != 2 or d.shape[1] != n:
        raise ValueError("matrix must be square")
    if not 1 <= k <= n - 1:
        raise ValueError(f"k={k} out of range for n={n}")
    masked = d.copy()
    np.fill_diagonal(masked, np.inf)
    smallest = np.partition(masked, k - 1, axis=1)[:, :k]
    return smallest.mean(axis=1)
