"""Deterministic brute-force nearest neighbours.

Every resampler is defined on Euclidean distance over the coded feature
space, with ties broken by lower row index. Distances are computed with
element-wise operations (no BLAS matmul shortcuts) so that equal inputs give
bit-equal distances and therefore stable tie-breaks.
"""

from __future__ import annotations

import numpy as np

_CHUNK = 256


class NeighborIndex:
    def __init__(self, points):
        self.points = np.ascontiguousarray(points, dtype=np.float64)
        if self.points.ndim != 2:
            raise ValueError("reference points must be a 2-d matrix")

    def __len__(self) -> int:
        return self.points.shape[0]

    def distances(self, queries) -> np.ndarray:
        """Squared Euclidean distances, shape (n_queries, n_points)."""
        Q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
        out = np.empty((Q.shape[0], len(self)), dtype=np.float64)
        for start in range(0, Q.shape[0], _CHUNK):
            block = Q[start:start + _CHUNK]
            diff = block[:, None, :] - self.points[None, :, :]
            out[start:start + block.shape[0]] = np.einsum("ijk,ijk->ij", diff, diff)
        return out

    def query_batch(self, queries, k: int, exclude_self: bool = False) -> np.ndarray:
        """Indices of the k nearest points per query, ordered by (distance, index).

        With ``exclude_self`` the i-th query skips reference point i (queries
        must then be the reference set itself).
        """
        d2 = self.distances(queries)
        n = len(self)
        if exclude_self:
            if d2.shape[0] != n:
                raise ValueError("exclude_self requires queries == reference points")
            d2[np.arange(n), np.arange(n)] = np.inf
        k = min(k, n - (1 if exclude_self else 0))
        if k < 1:
            raise ValueError("no neighbours available")
        idx = np.arange(n)
        order = np.empty((d2.shape[0], k), dtype=np.int64)
        for i in range(d2.shape[0]):
            order[i] = np.lexsort((idx, d2[i]))[:k]
        return order

    def query(self, point, k: int) -> np.ndarray:
        return self.query_batch(np.atleast_2d(point), k)[0]
