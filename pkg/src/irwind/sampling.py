"""Importance subsampling of the lagged vector dataset.

Vectors are weighted by their likelihood under each layer's velocity
model, the weights normalized into a mass function, and a fixed budget of
rows drawn per layer by locating uniform variates in the cumulative
weight profile (closest-value rule, ties to the smaller index, with
replacement).  Posterior layer probabilities ride along as per-row
weights for the regression stage.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import DomainError, NumericalError, ShapeError
from .layers import mvn_logpdf


@dataclass(frozen=True)
class TrainingSet:
    """Aligned rows of coordinates, velocities and posterior layer weights."""

    coords: np.ndarray  # (n, 2) pixel (x, y)
    velocities: np.ndarray  # (n, 2) m/s
    posteriors: np.ndarray  # (n, C), rows sum to 1

    def __post_init__(self):
        n = self.coords.shape[0]
        if self.velocities.shape[0] != n or self.posteriors.shape[0] != n:
            raise ShapeError("training-set fields must have aligned rows")


def importance_weights(velocities: np.ndarray, mu: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """Likelihood of each vector under one layer model, normalized to sum 1.

    Normalization happens in log space so a tight covariance cannot
    underflow the whole weight vector.
    """
    logp = np.atleast_1d(mvn_logpdf(np.asarray(velocities, dtype=float), mu, cov))
    norm = logsumexp(logp)
    if not np.isfinite(norm):
        raise NumericalError("importance weights degenerate: all densities underflow")
    return np.exp(logp - norm)


def cdf_sample(weights: np.ndarray, n: int, seed: int | np.random.Generator = 0) -> np.ndarray:
    """Draw n row indices by closest-CDF-value lookup, with replacement.

    For each uniform draw z the selected index minimizes |cum_i - z|;
    exact ties go to the smaller index.
    """
    if n < 1:
        raise DomainError(f"sample count must be >= 1, got {n}")
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ShapeError("weights must be a nonempty vector")
    cum = np.cumsum(w)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    z = rng.random(n)
    hi = np.searchsorted(cum, z, side="left")
    hi = np.minimum(hi, w.size - 1)
    lo = np.maximum(hi - 1, 0)
    pick_lo = np.abs(cum[lo] - z) <= np.abs(cum[hi] - z)
    return np.where(pick_lo, lo, hi)


def layer_posteriors(velocities: np.ndarray, mu: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """Posterior layer probabilities per vector under a uniform prior."""
    vel = np.asarray(velocities, dtype=float)
    logp = np.column_stack([np.atleast_1d(mvn_logpdf(vel, m, s)) for m, s in zip(mu, cov)])
    return np.exp(logp - logsumexp(logp, axis=1, keepdims=True))


def build_training_set(
    dataset: np.ndarray,
    mu: np.ndarray,
    cov: np.ndarray,
    n_star: int,
    seed: int = 0,
) -> TrainingSet:
    """Subsample the lagged dataset into the regression training set.

    ``dataset`` rows are (x, y, u, v).  Each of the C layers contributes
    ``n_star // C`` rows drawn from its importance weights.  If the pool
    is smaller than the budget, every row is taken once instead (no
    inflation past the unique pool).
    """
    rows = np.asarray(dataset, dtype=float)
    if rows.ndim != 2 or rows.shape[1] != 4:
        raise ShapeError(f"expected (N, 4) dataset rows, got {rows.shape}")
    n_layers = np.asarray(mu).shape[0]
    if n_star < n_layers:
        raise DomainError(f"sample budget {n_star} below layer count {n_layers}")
    vel = rows[:, 2:4]

    if rows.shape[0] < n_star:
        warnings.warn(
            f"pool of {rows.shape[0]} rows below budget {n_star}; taking all rows",
            stacklevel=2,
        )
        idx = np.arange(rows.shape[0])
    else:
        per_layer = n_star // n_layers
        seeds = np.random.SeedSequence(seed).spawn(n_layers)
        parts = []
        for c in range(n_layers):
            w_hat = importance_weights(vel, mu[c], cov[c])
            rng = np.random.default_rng(seeds[c])
            parts.append(cdf_sample(w_hat, per_layer, rng))
        idx = np.concatenate(parts)

    chosen = rows[idx]
    z = layer_posteriors(chosen[:, 2:4], mu, cov)
    return TrainingSet(coords=chosen[:, 0:2], velocities=chosen[:, 2:4], posteriors=z)
