"""Synthetic infrared cloud sequences with exact ground truth.

Each layer is a smooth random texture advected rigidly at a prescribed
velocity.  The generator converts the prescribed metric speed to a pixel
shift through the same geometric transform the pipeline inverts (at the
frame-center pixel), so the pipeline's recovered statistics can be
compared against the prescription.  Layer temperature levels follow the
lapse-rate model, lower-and-warmer clouds painted over higher ones, so
the mixture stage sees physically ordered modes.

Note on units: the velocity transform multiplies raw flow by
delta / f_r * dx * H, so "speed" values here are relative units; with
the reference geometry a ~1 px/frame cloud motion corresponds to a
prescribed speed of order 10^3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter, map_coordinates

from .atmosphere import GeometryModel, pixel_dims
from .errors import ConfigError

CLOUD_ONSET = 0.35  # texture level where cloud opacity starts
CLOUD_MASK_LEVEL = 0.5  # opacity counted as cloud in the emitted masks


@dataclass(frozen=True)
class SynthLayer:
    """Prescription of one synthetic cloud layer."""

    height_m: float
    speed: float  # relative metric units (see module note)
    angle_rad: float
    texture_scale_px: float = 8.0
    contrast_k: float = 10.0


@dataclass(frozen=True)
class SynthSpec:
    """Full synthetic-sequence prescription."""

    layers: tuple[SynthLayer, ...]
    n_frames: int = 28
    shape: tuple[int, int] = (60, 80)
    air_temp_k: float = 293.15
    sky_temp_k: float = 225.0
    sun_elevation_deg: float = 90.0
    sun_azimuth_deg: float = 180.0
    fov_diag_deg: float = 60.0
    frame_rate_hz: float = 1.0 / 15.0
    delta_scale: float = 2.29
    lapse_rate_k_per_m: float = 6.5e-3
    noise_k: float = 0.05  # sensor noise sigma; spreads change mass like real IR
    start_time: float = 1_600_000_000.0

    def __post_init__(self):
        if not 1 <= len(self.layers) <= 2:
            raise ConfigError(f"layer count must be 1 or 2, got {len(self.layers)}")
        if self.n_frames < 3:
            raise ConfigError("need at least 3 frames")
        if any(l.height_m <= 0 for l in self.layers):
            raise ConfigError("layer heights must be positive")


def pixel_shift(spec: SynthSpec, layer: SynthLayer) -> tuple[float, float]:
    """Per-frame pixel displacement implied by a layer's metric velocity.

    Inverts u = (delta / f_r) * dx * H * u_px at the frame-center pixel.
    """
    geom = GeometryModel(
        sun_elevation=spec.sun_elevation_deg,
        sun_azimuth=spec.sun_azimuth_deg,
        fov_diag=spec.fov_diag_deg,
        frame_rate=spec.frame_rate_hz,
        delta=spec.delta_scale,
    )
    dims = pixel_dims(geom, spec.shape)
    ic, jc = spec.shape[0] // 2, spec.shape[1] // 2
    scale = spec.delta_scale / spec.frame_rate_hz * layer.height_m
    u_ms = layer.speed * math.cos(layer.angle_rad)
    v_ms = layer.speed * math.sin(layer.angle_rad)
    return u_ms / (scale * dims.dx[ic, jc]), v_ms / (scale * dims.dy[ic, jc])


def truth_speed_angle(spec: SynthSpec, layer: SynthLayer) -> tuple[float, float]:
    """Frame-mean metric (speed, angle) of the layer's rigid pixel motion.

    The rigid pixel shift maps back through spatially varying pixel
    dimensions, so the exact frame-mean speed differs slightly from the
    prescription; this computes it from the same geometry.
    """
    geom = GeometryModel(
        sun_elevation=spec.sun_elevation_deg,
        sun_azimuth=spec.sun_azimuth_deg,
        fov_diag=spec.fov_diag_deg,
        frame_rate=spec.frame_rate_hz,
        delta=spec.delta_scale,
    )
    dims = pixel_dims(geom, spec.shape)
    u_px, v_px = pixel_shift(spec, layer)
    scale = spec.delta_scale / spec.frame_rate_hz * layer.height_m
    u = scale * dims.dx * u_px
    v = scale * dims.dy * v_px
    speed = float(np.hypot(u, v).mean())
    angle = float(np.arctan2(v.mean(), u.mean()))
    return speed, angle


def _layer_texture(rng, shape, pad, scale):
    canvas = rng.standard_normal((shape[0] + 2 * pad, shape[1] + 2 * pad))
    canvas = gaussian_filter(canvas, sigma=scale, mode="wrap")
    lo, hi = canvas.min(), canvas.max()
    return (canvas - lo) / (hi - lo)


def generate(spec: SynthSpec, out_dir: str | Path, seed: int = 0) -> Path:
    """Render a synthetic sequence directory with frames, masks and truth.

    Writes ``sequence.csv``, ``frame_*.csv``, ``mask_*.csv``,
    ``weather.csv`` and ``truth.csv`` (layers ordered highest first,
    matching the pipeline's output ordering).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xC10D)))
    m, n = spec.shape
    # highest first, so rendering order (upper first) equals reversed list
    order = sorted(range(len(spec.layers)), key=lambda i: -spec.layers[i].height_m)
    layers = [spec.layers[i] for i in order]

    shifts = [pixel_shift(spec, layer) for layer in layers]
    pad = int(
        math.ceil(
            max(
                (abs(du) + abs(dv)) * spec.n_frames
                for du, dv in shifts
            )
        )
    ) + 4
    textures = [
        _layer_texture(rng, spec.shape, pad, layer.texture_scale_px) for layer in layers
    ]

    yy, xx = np.mgrid[0:m, 0:n].astype(float)
    period = 1.0 / spec.frame_rate_hz
    manifest = ["index,timestamp,sun_elevation_deg,sun_azimuth_deg"]
    for k in range(spec.n_frames):
        temps = np.full((m, n), spec.sky_temp_k)
        mask = np.zeros((m, n), dtype=np.uint8)
        # alpha-composite: upper (cold) first, lower and warmer clouds on top
        for layer, texture, (du, dv) in zip(layers, textures, shifts):
            src_rows = yy + pad - dv * k
            src_cols = xx + pad - du * k
            tex = map_coordinates(texture, [src_rows, src_cols], order=1, mode="grid-wrap")
            opacity = np.clip((tex - CLOUD_ONSET) / (1.0 - CLOUD_ONSET), 0.0, 1.0)
            base = spec.air_temp_k - spec.lapse_rate_k_per_m * layer.height_m
            cloud_t = base + layer.contrast_k * (tex - 0.5)
            temps = temps * (1.0 - opacity) + cloud_t * opacity
            mask |= (opacity > CLOUD_MASK_LEVEL).astype(np.uint8)
        if spec.noise_k > 0:
            temps = temps + rng.normal(0.0, spec.noise_k, size=temps.shape)
        centikelvin = np.rint(temps * 100.0).astype(int)
        np.savetxt(out / f"frame_{k:05d}.csv", centikelvin, fmt="%d", delimiter=",")
        np.savetxt(out / f"mask_{k:05d}.csv", mask, fmt="%d", delimiter=",")
        manifest.append(
            f"{k},{spec.start_time + k * period:.3f},"
            f"{spec.sun_elevation_deg},{spec.sun_azimuth_deg}"
        )
    (out / "sequence.csv").write_text("\n".join(manifest) + "\n")

    t_end = spec.start_time + (spec.n_frames - 1) * period
    wx_lines = ["timestamp,pressure_hpa,air_temp_k,dew_point_k,humidity"]
    t = spec.start_time - 600.0
    while t <= t_end + 600.0:
        wx_lines.append(f"{t:.3f},840.0,{spec.air_temp_k},278.15,0.35")
        t += 600.0
    (out / "weather.csv").write_text("\n".join(wx_lines) + "\n")

    truth_lines = ["layer,height_m,speed_mps,angle_rad"]
    for c, layer in enumerate(layers):
        speed, angle = truth_speed_angle(spec, layer)
        truth_lines.append(f"{c},{layer.height_m:.9g},{speed:.9g},{angle:.9g}")
    (out / "truth.csv").write_text("\n".join(truth_lines) + "\n")
    return out
