"""Temperature-to-height mapping and camera geometry.

Height uses a linear lapse-rate model (a stand-in for the full moist
adiabat: configurable rate, same algebraic role).  Geometry uses a
pinhole camera whose optical axis tracks the Sun, i.e. it is tilted by
(90 deg - sun elevation) from zenith; a cloud layer is treated as a flat
plane at its mean height, which makes the per-pixel metric footprint
grow toward the horizon side of the frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, GeometryError, ShapeError
from .imaging import IRFrame, WeatherRecord

HEIGHT_CEILING_M = 15_000.0  # clamp for the lapse-rate inversion
MIN_ELEVATION_DEG = 2.0  # grazing-projection guard


@dataclass(frozen=True)
class LapseRateModel:
    """Linear temperature-height relation T(h) = T_ref - gamma * (h - ref_height)."""

    gamma: float = 6.5e-3  # K per meter
    ref_height: float = 0.0  # meters

    def __post_init__(self):
        if self.gamma <= 0:
            raise DomainError("lapse rate gamma must be positive")


@dataclass(frozen=True)
class GeometryModel:
    """Sun-tracking camera geometry and velocity scaling constants."""

    sun_elevation: float  # degrees, (0, 90]
    sun_azimuth: float  # degrees; recorded, not used by the projection
    fov_diag: float = 60.0  # degrees
    frame_rate: float = 1.0 / 15.0  # frames per second
    delta: float = 2.29  # dimensionless gain on the raw flow

    def __post_init__(self):
        if not 0.0 < self.sun_elevation <= 90.0:
            raise DomainError(f"sun elevation {self.sun_elevation} outside (0, 90]")
        if self.fov_diag <= 0 or self.frame_rate <= 0 or self.delta <= 0:
            raise DomainError("fov_diag, frame_rate and delta must be positive")


@dataclass(frozen=True)
class PixelDims:
    """Per-pixel angular footprints, normalized per meter of layer height.

    Multiplying by a layer height gives meters per pixel at that layer.
    """

    dx: np.ndarray  # (M, N)
    dy: np.ndarray  # (M, N)


def height_map(
    frame: IRFrame | np.ndarray,
    wx: WeatherRecord,
    model: LapseRateModel = LapseRateModel(),
    ceiling_m: float = HEIGHT_CEILING_M,
) -> np.ndarray:
    """Invert the lapse-rate model per pixel: colder pixels sit higher.

    Pixels warmer than the surface air temperature clamp to the reference
    height; the ceiling absorbs unphysically cold pixels.
    """
    temps = frame.temps if isinstance(frame, IRFrame) else np.asarray(frame, dtype=float)
    h = model.ref_height + (wx.air_temp - temps) / model.gamma
    return np.clip(h, max(model.ref_height, 0.0), ceiling_m)


def pixel_dims(geom: GeometryModel, shape: tuple[int, int] = (60, 80)) -> PixelDims:
    """Per-pixel footprint of a flat layer seen through the tilted camera.

    The diagonal FOV splits across the frame aspect; each row i sees the
    layer at elevation angle ``theta_i = sun_elevation + (i_c - i) * dtheta``
    (row 0 is the top of the frame).  The along-row footprint scales as
    1/sin(theta); the across-row footprint as 1/sin^2(theta) because the
    layer plane is foreshortened (distance along the plane grows as the
    ray flattens).
    """
    m, n = shape
    diag = math.hypot(m, n)
    fov_x = geom.fov_diag * n / diag
    fov_y = geom.fov_diag * m / diag
    dtheta_x = math.radians(fov_x) / n
    dtheta_y = math.radians(fov_y) / m

    i_c = (m - 1) / 2.0
    rows = np.arange(m, dtype=float)
    theta_deg = geom.sun_elevation + (i_c - rows) * (fov_y / m)
    if np.any(theta_deg <= MIN_ELEVATION_DEG):
        raise GeometryError(
            f"grazing projection: row elevation angle down to {theta_deg.min():.2f} deg"
        )
    sin_theta = np.sin(np.radians(theta_deg))
    dx = np.broadcast_to(dtheta_x / sin_theta[:, None], shape).copy()
    dy = np.broadcast_to(dtheta_y / sin_theta[:, None] ** 2, shape).copy()
    return PixelDims(dx=dx, dy=dy)


def transform_velocity(
    u_layers: np.ndarray,
    v_layers: np.ndarray,
    gamma_post: np.ndarray,
    heights: np.ndarray,
    dims: PixelDims,
    geom: GeometryModel,
) -> tuple[np.ndarray, np.ndarray]:
    """Map per-layer raw flow (pixels/frame) to metric velocity (m/s).

    u[i,j] = (delta / f_r) * dx[i,j] * sum_c H_c * gamma[i,j,c] * u_c[i,j]
    and analogously for v with dy.  Linear in both the raw flow and the
    layer heights.
    """
    u_layers = np.asarray(u_layers, dtype=float)
    v_layers = np.asarray(v_layers, dtype=float)
    gamma_post = np.asarray(gamma_post, dtype=float)
    heights = np.asarray(heights, dtype=float)
    c = heights.shape[0]
    if u_layers.shape[0] != c or v_layers.shape[0] != c or gamma_post.shape[-1] != c:
        raise ShapeError(
            f"layer count mismatch: flow {u_layers.shape[0]}/{v_layers.shape[0]}, "
            f"responsibilities {gamma_post.shape[-1]}, heights {c}"
        )
    if u_layers.shape[1:] != dims.dx.shape or gamma_post.shape[:-1] != dims.dx.shape:
        raise ShapeError("flow/responsibility grids do not match the pixel-dims grid")
    if gamma_post.sum(axis=-1).max() > 1.0 + 1e-9:
        raise DomainError("per-pixel responsibilities sum above 1")

    # gamma is (M, N, C); move layers first to broadcast against (C, M, N)
    g = np.moveaxis(gamma_post, -1, 0)
    weighted_u = np.tensordot(heights, g * u_layers, axes=(0, 0))
    weighted_v = np.tensordot(heights, g * v_layers, axes=(0, 0))
    scale = geom.delta / geom.frame_rate
    return scale * dims.dx * weighted_u, scale * dims.dy * weighted_v
