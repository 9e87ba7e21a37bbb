"""Shared dataset builders for the test suite."""

from __future__ import annotations

import numpy as np

from imbaml import Dataset, Rng


def make_dataset(counts: dict[int, int], seed: int = 0, d: int = 2,
                 spread: float = 4.0, noise: float = 1.0,
                 name: str = "synthetic") -> Dataset:
    """Gaussian blob per class, class c centred at (c*spread, ..)."""
    rng = Rng(seed)
    X_parts, y_parts = [], []
    for c, n in sorted(counts.items()):
        centre = np.full(d, c * spread, dtype=np.float64)
        X_parts.append(rng.np.normal(0.0, noise, size=(n, d)) + centre)
        y_parts.append(np.full(n, c, dtype=np.int64))
    return Dataset.from_arrays(name, np.vstack(X_parts), np.concatenate(y_parts))


def overlapping_binary(n_maj: int, n_min: int, seed: int = 0, d: int = 2,
                       separation: float = 1.5, name: str = "overlap") -> Dataset:
    rng = Rng(seed)
    Xmaj = rng.np.normal(0.0, 1.0, size=(n_maj, d))
    Xmin = rng.np.normal(separation, 1.0, size=(n_min, d))
    y = np.array([0] * n_maj + [1] * n_min, dtype=np.int64)
    return Dataset.from_arrays(name, np.vstack([Xmaj, Xmin]), y)


def grid_dataset(rows) -> Dataset:
    """Explicit (features..., label) tuples for hand-crafted fixtures."""
    rows = list(rows)
    X = np.array([r[:-1] for r in rows], dtype=np.float64)
    y = np.array([r[-1] for r in rows], dtype=np.int64)
    return Dataset.from_arrays("fixture", X, y)


def row_bytes(X: np.ndarray) -> set[bytes]:
    return {np.ascontiguousarray(row).tobytes() for row in np.asarray(X, dtype=np.float64)}
