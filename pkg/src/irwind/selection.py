"""Change-based selection of velocity vectors and the lagged dataset.

The inter-frame intensity change is normalized into a mass distribution;
sorting pixels by change and accumulating that mass gives each pixel a
rank value in [0, 1).  Thresholding the rank at tau keeps the pixels
carrying the top (1 - tau) of total change mass, which rejects the noisy
bulk of a dense flow field.  Selected (x, y, u, v) rows from the last
``lag`` frames form the regression dataset.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .errors import DomainError, EmptyDatasetError, ShapeError, ZeroDiffError


def diff_map(prev: np.ndarray, curr: np.ndarray) -> np.ndarray:
    """Normalized absolute intensity difference; sums to 1."""
    prev = np.asarray(prev, dtype=float)
    curr = np.asarray(curr, dtype=float)
    if prev.shape != curr.shape:
        raise ShapeError(f"frame shapes differ: {prev.shape} vs {curr.shape}")
    d = np.abs(prev - curr)
    total = d.sum()
    if total <= 0:
        raise ZeroDiffError("consecutive frames are identical")
    return d / total


def threshold_mask(d: np.ndarray, tau: float) -> np.ndarray:
    """Select pixels whose accumulated change mass reaches tau.

    Pixels are sorted by change ascending (ties in row-major order), the
    running sum is scattered back to pixel positions and compared to tau,
    so the selected set carries roughly the top (1 - tau) of the mass.
    """
    if not 0.0 <= tau < 1.0:
        raise DomainError(f"tau must lie in [0, 1), got {tau}")
    flat = np.asarray(d, dtype=float).ravel()
    order = np.argsort(flat, kind="stable")
    ranks = np.empty_like(flat)
    ranks[order] = np.cumsum(flat[order])
    return (ranks >= tau).reshape(np.shape(d)).astype(np.uint8)


def selected_vectors(
    mask: np.ndarray, u: np.ndarray, v: np.ndarray
) -> np.ndarray:
    """Rows (x, y, u, v) for every selected pixel, row-major order."""
    mask = np.asarray(mask)
    if mask.shape != np.shape(u) or mask.shape != np.shape(v):
        raise ShapeError("mask and velocity grids must share a shape")
    rows, cols = np.nonzero(mask)
    return np.column_stack([cols.astype(float), rows.astype(float), u[rows, cols], v[rows, cols]])


class LagBuffer:
    """Ring of the most recent per-frame selected vector sets, newest first."""

    def __init__(self, lag: int):
        if lag < 1:
            raise DomainError(f"lag must be >= 1, got {lag}")
        self.lag = lag
        self._entries: deque[np.ndarray] = deque(maxlen=lag)

    def __len__(self) -> int:
        return len(self._entries)

    def push(self, rows: np.ndarray) -> None:
        """Insert the newest frame's rows, evicting beyond the lag depth."""
        rows = np.asarray(rows, dtype=float)
        if rows.ndim != 2 or rows.shape[1] != 4:
            raise ShapeError(f"expected (n, 4) rows of (x, y, u, v), got {rows.shape}")
        self._entries.appendleft(rows.copy())

    def collect(self) -> np.ndarray:
        """Concatenate the stored frames' rows, newest first."""
        if not self._entries:
            raise EmptyDatasetError("lag buffer is empty")
        out = np.concatenate(list(self._entries), axis=0)
        if out.shape[0] == 0:
            raise EmptyDatasetError("no selected vectors in the lag window")
        return out


def push_and_collect(buffer: LagBuffer, frame_vectors: np.ndarray) -> np.ndarray:
    """Push the newest frame's selected rows and return the lagged dataset."""
    buffer.push(frame_vectors)
    return buffer.collect()
