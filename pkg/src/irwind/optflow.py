"""Dense weighted Lucas-Kanade flow between consecutive intensity frames.

Each cloud layer gets its own flow field: the per-pixel weights in the
windowed least squares are that layer's mixture responsibilities, so the
2x2 normal equations share gradients across layers and differ only in
the weighting.  Ridge regularization keeps the system invertible where
texture (or weight mass) vanishes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d, uniform_filter

from .errors import DomainError, ShapeError

ZERO_MASS = 1e-12  # below this window weight mass the flow is pinned to zero


@dataclass(frozen=True)
class WLKParams:
    """Window side (pixels, odd), ridge term and differential kernel amplitude."""

    window: int = 5
    tau_reg: float = 1e-8
    sigma: float = 1.0

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise DomainError(f"window side must be odd and >= 3, got {self.window}")
        if self.tau_reg <= 0 or self.sigma <= 0:
            raise DomainError("tau_reg and sigma must be positive")

    @classmethod
    def from_area(cls, area_px2: float, tau_reg: float = 1e-8, sigma: float = 1.0):
        """Window side from a neighborhood area, rounded down to an odd side."""
        side = 2 * int(math.isqrt(int(area_px2)) // 2) + 1
        return cls(window=max(side, 3), tau_reg=tau_reg, sigma=sigma)


@dataclass(frozen=True)
class LayerFlow:
    """Per-layer raw motion vectors in pixels per frame."""

    u: np.ndarray  # (C, M, N)
    v: np.ndarray  # (C, M, N)


def _gaussian_taps(sigma: float, radius: int = 2):
    offsets = np.arange(-radius, radius + 1, dtype=float)
    smooth = np.exp(-0.5 * (offsets / sigma) ** 2)
    smooth /= smooth.sum()
    deriv = offsets * np.exp(-0.5 * (offsets / sigma) ** 2)
    deriv /= (offsets * deriv).sum()  # unit response on a linear ramp
    return smooth, deriv


def spatiotemporal_gradients(prev: np.ndarray, curr: np.ndarray, sigma: float = 1.0):
    """Space-time partial derivatives of a consecutive frame pair.

    Spatial gradients come from separable derivative-of-Gaussian taps on
    the mean frame; the temporal derivative is the plain difference.
    Edges replicate.
    """
    prev = np.asarray(prev, dtype=float)
    curr = np.asarray(curr, dtype=float)
    if prev.shape != curr.shape:
        raise ShapeError(f"frame shapes differ: {prev.shape} vs {curr.shape}")
    smooth, deriv = _gaussian_taps(sigma)
    mean = 0.5 * (prev + curr)
    ix = correlate1d(correlate1d(mean, deriv, axis=1, mode="nearest"), smooth, axis=0, mode="nearest")
    iy = correlate1d(correlate1d(mean, deriv, axis=0, mode="nearest"), smooth, axis=1, mode="nearest")
    it = curr - prev
    return ix, iy, it


def _window_sum(arr: np.ndarray, side: int) -> np.ndarray:
    # zero contribution outside the frame
    return uniform_filter(arr, size=side, mode="constant", cval=0.0) * side**2


def wlk_flow(
    prev: np.ndarray,
    curr: np.ndarray,
    weights: np.ndarray,
    params: WLKParams = WLKParams(),
) -> LayerFlow:
    """Per-layer weighted Lucas-Kanade flow.

    ``weights`` is (M, N, C) with values in [0, 1]; each layer solves, at
    every pixel, ``(A^T W A + tau I) [u v]^T = -A^T W It`` over the square
    window, with W the per-neighbor layer weights.
    """
    weights = np.asarray(weights, dtype=float)
    if weights.ndim == 2:
        weights = weights[..., None]
    if weights.shape[:2] != np.shape(prev):
        raise ShapeError(f"weights grid {weights.shape[:2]} does not match frames {np.shape(prev)}")
    if weights.min() < -1e-9 or weights.max() > 1.0 + 1e-9:
        raise DomainError("weights must lie in [0, 1]")

    ix, iy, it = spatiotemporal_gradients(prev, curr, params.sigma)
    n_layers = weights.shape[2]
    m, n = ix.shape
    u = np.zeros((n_layers, m, n))
    v = np.zeros((n_layers, m, n))
    for c in range(n_layers):
        w = weights[..., c]
        a11 = _window_sum(w * ix * ix, params.window) + params.tau_reg
        a12 = _window_sum(w * ix * iy, params.window)
        a22 = _window_sum(w * iy * iy, params.window) + params.tau_reg
        b1 = _window_sum(w * ix * it, params.window)
        b2 = _window_sum(w * iy * it, params.window)
        det = a11 * a22 - a12 * a12
        u_c = (-a22 * b1 + a12 * b2) / det
        v_c = (-a11 * b2 + a12 * b1) / det
        dead = _window_sum(w, params.window) < ZERO_MASS
        u_c[dead] = 0.0
        v_c[dead] = 0.0
        u[c] = u_c
        v[c] = v_c
    return LayerFlow(u=u, v=v)
