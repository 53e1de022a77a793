"""Hard-assignment (ICM) inference of per-layer velocity and height models.

Velocity vectors get a bivariate normal per layer, pixel heights a
univariate normal per layer.  Both alternate exact ML parameter updates
with MAP reassignment, which makes the complete-data log-likelihood under
the hard assignments nondecreasing.  Layers are finally ordered by mean
cloud height, highest first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, EmptyLayerError, NumericalError, ShapeError

COV_JITTER = 1e-8
MAX_ITER = 100
MAX_RESEEDS = 5


@dataclass(frozen=True)
class GaussianLayer:
    """Fitted per-layer models: velocity (bivariate) and height (univariate)."""

    mu_v: np.ndarray  # (2,) m/s
    cov_v: np.ndarray  # (2, 2)
    mu_h: float  # meters
    var_h: float  # meters^2
    count: int  # assigned velocity vectors


@dataclass(frozen=True)
class VelocityFit:
    mu: np.ndarray  # (C, 2)
    cov: np.ndarray  # (C, 2, 2)
    labels: np.ndarray  # (N,) hard layer index per vector
    trace: np.ndarray  # complete-data log-likelihood per iteration


@dataclass(frozen=True)
class HeightFit:
    mu: np.ndarray  # (C,)
    var: np.ndarray  # (C,)
    rho: np.ndarray  # (M, N, C) one-hot pixel assignment
    mean_heights: np.ndarray  # (C,) masked mean height per layer, ordered high to low
    order: np.ndarray  # permutation applied to the incoming layer indices


def mvn_logpdf(v: np.ndarray, mu: np.ndarray, cov: np.ndarray) -> np.ndarray | float:
    """Bivariate normal log-density; retries once with jitter on singularity."""
    v = np.atleast_2d(np.asarray(v, dtype=float))
    mu = np.asarray(mu, dtype=float)
    cov = np.asarray(cov, dtype=float)
    d = mu.shape[0]
    for attempt in (0, 1):
        use = cov + (COV_JITTER * np.eye(d) if attempt else 0.0)
        sign, logdet = np.linalg.slogdet(use)
        if sign > 0:
            diff = v - mu
            maha = np.einsum("ni,ni->n", diff, np.linalg.solve(use, diff.T).T)
            out = -0.5 * (d * np.log(2.0 * np.pi) + logdet + maha)
            return out if out.shape[0] > 1 else float(out[0])
    raise NumericalError("covariance singular even after jitter")


def _layer_loglik(vel, mu, cov, labels, n_layers):
    total = 0.0
    for c in range(n_layers):
        sel = labels == c
        if sel.any():
            total += float(np.sum(mvn_logpdf(vel[sel], mu[c], cov[c])))
    return total


def _map_labels(vel, mu, cov):
    scores = np.column_stack([mvn_logpdf(vel, m, s) for m, s in zip(mu, cov)])
    return np.argmax(scores, axis=1)  # ties resolve to the lower index


def icm_velocity(velocities: np.ndarray, n_layers: int, seed: int = 0) -> VelocityFit:
    """Cluster velocity vectors into layers by fixed-point ICM.

    Starts from a random hard assignment, alternates per-layer Gaussian ML
    updates with MAP reassignment, and stops when the assignment is stable.
    An emptied layer is reseeded with the vector farthest (in Mahalanobis
    distance) from its current layer, a bounded number of times.
    """
    vel = np.asarray(velocities, dtype=float)
    if vel.ndim != 2 or vel.shape[1] != 2:
        raise ShapeError(f"expected (N, 2) velocities, got {vel.shape}")
    n = vel.shape[0]
    if not 1 <= n_layers <= 2:
        raise DomainError(f"layer count must be 1 or 2, got {n_layers}")
    if n < 4 * n_layers:
        raise DomainError(f"need at least {4 * n_layers} vectors, got {n}")

    rng = np.random.default_rng(seed)
    labels = rng.integers(0, n_layers, size=n)
    mu = np.zeros((n_layers, 2))
    cov = np.tile(np.eye(2), (n_layers, 1, 1))
    trace: list[float] = []
    reseeds = 0
    for _ in range(MAX_ITER):
        for c in range(n_layers):
            sel = labels == c
            if not sel.any():
                if reseeds >= MAX_RESEEDS:
                    raise EmptyLayerError(f"velocity layer {c} kept emptying")
                reseeds += 1
                far = _farthest_vector(vel, mu, cov, labels)
                labels[far] = c
                sel = labels == c
                trace.clear()  # reseeding restarts the ascent
            pts = vel[sel]
            mu[c] = pts.mean(axis=0)
            diff = pts - mu[c]
            cov[c] = diff.T @ diff / pts.shape[0] + COV_JITTER * np.eye(2)
        new_labels = _map_labels(vel, mu, cov)
        trace.append(_layer_loglik(vel, mu, cov, new_labels, n_layers))
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels

    if min(np.bincount(labels, minlength=n_layers)) == 0:
        raise EmptyLayerError("a velocity layer ended empty")
    return VelocityFit(mu=mu, cov=cov, labels=labels, trace=np.asarray(trace))


def _farthest_vector(vel, mu, cov, labels):
    best, best_d = 0, -np.inf
    for c in np.unique(labels):
        sel = np.nonzero(labels == c)[0]
        diff = vel[sel] - mu[c]
        maha = np.einsum("ni,ni->n", diff, np.linalg.solve(cov[c], diff.T).T)
        i = int(np.argmax(maha))
        if maha[i] > best_d and sel.size > 1:
            best, best_d = int(sel[i]), float(maha[i])
    return best


def _norm_logpdf(x, mu, var):
    return -0.5 * (np.log(2.0 * np.pi * var) + (x - mu) ** 2 / var)


def icm_height(
    heights: np.ndarray,
    mask: np.ndarray,
    flow_u: np.ndarray,
    flow_v: np.ndarray,
    velocity_fit: VelocityFit,
) -> HeightFit:
    """Infer per-layer height normals on cloud pixels and order the layers.

    Pixel assignments start from the MAP classification of the per-pixel
    flow under the velocity models, then ICM alternates univariate-normal
    updates (over masked pixels) with height-MAP reassignment of every
    pixel.  Output layer index 0 is the highest layer; ``order`` records
    the permutation so callers can reorder the velocity models to match.
    """
    h = np.asarray(heights, dtype=float)
    mask = np.asarray(mask).astype(bool)
    if h.shape != mask.shape or h.shape != np.shape(flow_u) or h.shape != np.shape(flow_v):
        raise ShapeError("heights, mask and flow grids must share a shape")
    n_layers = velocity_fit.mu.shape[0]
    shape = h.shape

    vxy = np.column_stack([np.ravel(flow_u), np.ravel(flow_v)])
    labels = _map_labels(vxy, velocity_fit.mu, velocity_fit.cov).reshape(shape)

    mu = np.zeros(n_layers)
    var = np.ones(n_layers)
    for _ in range(MAX_ITER):
        for c in range(n_layers):
            sel = (labels == c) & mask
            if not sel.any():
                raise EmptyLayerError(f"height layer {c} has no cloud support")
            pts = h[sel]
            mu[c] = float(pts.mean())
            var[c] = max(float(pts.var()), COV_JITTER)
        scores = np.stack([_norm_logpdf(h, mu[c], var[c]) for c in range(n_layers)], axis=-1)
        new_labels = np.argmax(scores, axis=-1)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels

    mean_heights = np.empty(n_layers)
    for c in range(n_layers):
        sel = (labels == c) & mask
        if not sel.any():
            raise EmptyLayerError(f"height layer {c} has no cloud support")
        mean_heights[c] = float(h[sel].mean())

    order = np.argsort(-mean_heights, kind="stable")
    relabeled = np.empty_like(labels)
    for new_c, old_c in enumerate(order):
        relabeled[labels == old_c] = new_c
    rho = np.eye(n_layers, dtype=float)[relabeled]
    return HeightFit(
        mu=mu[order],
        var=var[order],
        rho=rho,
        mean_heights=mean_heights[order],
        order=order,
    )


def fit_layers(
    dataset_uv: np.ndarray,
    heights: np.ndarray,
    mask: np.ndarray,
    flow_u: np.ndarray,
    flow_v: np.ndarray,
    n_layers: int,
    seed: int = 0,
) -> tuple[list[GaussianLayer], VelocityFit, HeightFit]:
    """Velocity ICM, then height ICM, then height-ordered GaussianLayer list."""
    vfit = icm_velocity(dataset_uv, n_layers, seed=seed)
    hfit = icm_height(heights, mask, flow_u, flow_v, vfit)
    counts = np.bincount(vfit.labels, minlength=n_layers)
    layers = [
        GaussianLayer(
            mu_v=vfit.mu[old_c].copy(),
            cov_v=vfit.cov[old_c].copy(),
            mu_h=float(hfit.mu[new_c]),
            var_h=float(hfit.var[new_c]),
            count=int(counts[old_c]),
        )
        for new_c, old_c in enumerate(hfit.order)
    ]
    return layers, vfit, hfit
