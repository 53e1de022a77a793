"""Derived scalar fields and evaluation metrics for an extrapolated flow.

Divergence and curl use forward differences with a replicated last
row/column (so their last row/column is exactly zero).  The stream and
potential functions integrate the flow with cumulative trapezoids along
the grid axes from the (0, 0) anchor; the two axis-ordered contributions
are averaged, which is where the 1/2 prefactor comes from.  Those
integrals are path-dependent unless divergence and curl vanish, hence
the warnings when the preconditions are badly violated.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .atmosphere import PixelDims
from .errors import ShapeError

FLOW_TOL = 1e-3  # mean |div| / |curl| per pixel considered "approximately free"


@dataclass(frozen=True)
class FieldGrid:
    """Extrapolated velocity components plus derived scalar fields."""

    u: np.ndarray
    v: np.ndarray
    div: np.ndarray
    curl: np.ndarray
    phi: np.ndarray  # streamfunction, anchored to 0 at pixel (0, 0)
    psi: np.ndarray  # velocity potential, anchored likewise


@dataclass
class MetricsReport:
    """Held-out errors, grid regularity sums and ground-truth MAPEs."""

    mae: float = float("nan")
    wmae: float = float("nan")
    div_sum: float = 0.0
    curl_sum: float = 0.0
    mape_height: float = float("nan")
    mape_speed: float = float("nan")
    mape_angle: float = float("nan")
    runtime: float = 0.0


def div_curl(u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Forward-difference divergence and curl on the pixel grid."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ShapeError(f"component shapes differ: {u.shape} vs {v.shape}")
    dx_u = np.zeros_like(u)
    dx_u[:, :-1] = u[:, 1:] - u[:, :-1]
    dy_u = np.zeros_like(u)
    dy_u[:-1, :] = u[1:, :] - u[:-1, :]
    dx_v = np.zeros_like(v)
    dx_v[:, :-1] = v[:, 1:] - v[:, :-1]
    dy_v = np.zeros_like(v)
    dy_v[:-1, :] = v[1:, :] - v[:-1, :]
    return dx_u + dy_v, dx_v - dy_u


def integrate_stream(
    u: np.ndarray, v: np.ndarray, dims: PixelDims, layer_height: float
) -> np.ndarray:
    """Streamfunction from d(phi) = u dy - v dx, trapezoid-integrated.

    Warns when the field is visibly divergent, since then the level sets
    stop being integral curves of the flow.
    """
    div, _ = div_curl(u, v)
    if np.abs(div).mean() > FLOW_TOL:
        warnings.warn("integrating a streamfunction over a divergent field", stacklevel=2)
    along_rows = cumulative_trapezoid(u * dims.dy, axis=0, initial=0.0)
    along_cols = cumulative_trapezoid(v * dims.dx, axis=1, initial=0.0)
    return 0.5 * layer_height * (along_rows - along_cols)


def integrate_potential(
    u: np.ndarray, v: np.ndarray, dims: PixelDims, layer_height: float
) -> np.ndarray:
    """Velocity potential from d(psi) = u dx + v dy, trapezoid-integrated."""
    _, curl = div_curl(u, v)
    if np.abs(curl).mean() > FLOW_TOL:
        warnings.warn("integrating a velocity potential over a rotational field", stacklevel=2)
    along_cols = cumulative_trapezoid(u * dims.dx, axis=1, initial=0.0)
    along_rows = cumulative_trapezoid(v * dims.dy, axis=0, initial=0.0)
    return 0.5 * layer_height * (along_cols + along_rows)


def build_field(
    u: np.ndarray, v: np.ndarray, dims: PixelDims, layer_height: float
) -> FieldGrid:
    """Assemble the full per-layer field grid with derived quantities."""
    div, curl = div_curl(u, v)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        phi = integrate_stream(u, v, dims, layer_height)
        psi = integrate_potential(u, v, dims, layer_height)
    return FieldGrid(u=u, v=v, div=div, curl=curl, phi=phi, psi=psi)


def sample_field(u: np.ndarray, v: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """Velocity components at integer pixel coordinates (x, y) rows."""
    coords = np.asarray(coords)
    cols = np.clip(np.rint(coords[:, 0]).astype(int), 0, u.shape[1] - 1)
    rows = np.clip(np.rint(coords[:, 1]).astype(int), 0, u.shape[0] - 1)
    return np.column_stack([u[rows, cols], v[rows, cols]])


def mae_rows(pred_uv: np.ndarray, true_uv: np.ndarray) -> float:
    """Mean absolute error, components averaged."""
    err = np.abs(np.asarray(pred_uv) - np.asarray(true_uv))
    return float(err.mean())


def wmae_rows(pred_uv: np.ndarray, true_uv: np.ndarray, z: np.ndarray) -> float:
    """Weighted MAE with per-row weights (a row's own-layer posterior)."""
    z = np.asarray(z, dtype=float)
    if z.sum() <= 0:
        return mae_rows(pred_uv, true_uv)
    err = np.abs(np.asarray(pred_uv) - np.asarray(true_uv)).mean(axis=1)
    return float((z * err).sum() / z.sum())


def wrap_angle(a: np.ndarray | float) -> np.ndarray | float:
    """Wrap an angle difference into (-pi, pi]."""
    return -(-(np.asarray(a) + np.pi) % (2.0 * np.pi) - np.pi)


def field_stats(u: np.ndarray, v: np.ndarray, layer_height: float):
    """(height, mean speed, mean direction) summary of one layer's field."""
    speed = float(np.hypot(u, v).mean())
    angle = float(np.arctan2(np.mean(v), np.mean(u)))
    return layer_height, speed, angle


def mape_stats(pred: tuple[float, float, float], truth: tuple[float, float, float]):
    """Percent errors of (height, speed, angle); angles wrapped, scaled by pi."""
    ph, ps, pa = pred
    th, ts, ta = truth
    mape_h = abs(ph - th) / max(abs(th), 1e-12) * 100.0
    mape_s = abs(ps - ts) / max(abs(ts), 1e-12) * 100.0
    mape_a = abs(float(wrap_angle(pa - ta))) / np.pi * 100.0
    return mape_h, mape_s, mape_a


def metrics(
    field: FieldGrid,
    truth_rows: np.ndarray | None = None,
    z: np.ndarray | None = None,
    pred_stats: tuple[float, float, float] | None = None,
    truth_stats: tuple[float, float, float] | None = None,
    runtime: float = 0.0,
) -> MetricsReport:
    """Evaluate one layer's field against held-out rows and reference stats.

    ``truth_rows`` are (x, y, u, v); their predictions are read off the
    grid at the row coordinates.  Ground-truth stats are optional; grid
    div/curl sums are always reported.
    """
    report = MetricsReport(runtime=runtime)
    report.div_sum = float(np.abs(field.div).sum())
    report.curl_sum = float(np.abs(field.curl).sum())
    if truth_rows is not None and len(truth_rows) > 0:
        truth_rows = np.asarray(truth_rows, dtype=float)
        pred = sample_field(field.u, field.v, truth_rows[:, 0:2])
        report.mae = mae_rows(pred, truth_rows[:, 2:4])
        weights = z if z is not None else np.ones(truth_rows.shape[0])
        report.wmae = wmae_rows(pred, truth_rows[:, 2:4], weights)
    if pred_stats is not None and truth_stats is not None:
        report.mape_height, report.mape_speed, report.mape_angle = mape_stats(
            pred_stats, truth_stats
        )
    return report


def format_sig(value: float) -> str:
    """Bit-exact decimal formatting used by every output file."""
    return f"{value:.9g}"


def write_field_csv(path, field: FieldGrid) -> None:
    """Dump one layer's grids as rows of x,y,u,v,div,curl,phi,psi.

    phi/psi carry height-times-velocity (flux-like) units.
    """
    m, n = field.u.shape
    with open(path, "w") as fh:
        fh.write("x,y,u,v,div,curl,phi,psi\n")
        for i in range(m):
            for j in range(n):
                vals = (
                    field.u[i, j],
                    field.v[i, j],
                    field.div[i, j],
                    field.curl[i, j],
                    field.phi[i, j],
                    field.psi[i, j],
                )
                fh.write(f"{j},{i}," + ",".join(format_sig(v) for v in vals) + "\n")


def write_metrics(path, report: MetricsReport) -> None:
    """Structured text dump of a metrics report (flat JSON, fixed digits)."""
    fields = (
        "mae",
        "wmae",
        "div_sum",
        "curl_sum",
        "mape_height",
        "mape_speed",
        "mape_angle",
    )
    with open(path, "w") as fh:
        fh.write("{\n")
        lines = []
        for name in fields:
            value = getattr(report, name)
            text = "null" if np.isnan(value) else format_sig(value)
            lines.append(f'  "{name}": {text}')
        fh.write(",\n".join(lines))
        fh.write("\n}\n")
