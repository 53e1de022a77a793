"""Beta mixture over normalized pixel temperatures, fitted by EM.

The M-step has no closed form for beta shape parameters, so it runs a
projected backtracking gradient ascent on the expected complete-data
log-likelihood; the priors update is closed-form.  Because every partial
M-step only ever increases that objective, the marginal log-likelihood
trace returned by :func:`em_fit` is nondecreasing (generalized EM).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betaln, digamma, logsumexp

from .errors import DomainError, EmptyLayerError, NumericalError, ShapeError

# Shape parameters are kept inside this box for numerical safety.
PARAM_LO = 1e-3
PARAM_HI = 1e3


@dataclass(frozen=True)
class BetaMixture:
    """Mixture of C beta densities: priors pi and shapes (alpha, beta)."""

    pi: np.ndarray  # (C,)
    alpha: np.ndarray  # (C,)
    beta: np.ndarray  # (C,)

    def __post_init__(self):
        if not math.isclose(float(self.pi.sum()), 1.0, abs_tol=1e-6):
            raise DomainError("mixture priors must sum to 1")
        if np.any(self.pi < -1e-12) or np.any(self.alpha <= 0) or np.any(self.beta <= 0):
            raise DomainError("priors must be nonnegative and shapes positive")

    @property
    def n_layers(self) -> int:
        return self.pi.shape[0]

    def means(self) -> np.ndarray:
        return self.alpha / (self.alpha + self.beta)


def beta_logpdf(t: np.ndarray | float, alpha: float, beta: float) -> np.ndarray | float:
    """Log beta density: (a-1) log t + (b-1) log(1-t) - log B(a, b)."""
    t = np.asarray(t, dtype=float)
    if alpha <= 0 or beta <= 0:
        raise DomainError(f"beta shapes must be positive, got ({alpha}, {beta})")
    if np.any(t <= 0) or np.any(t >= 1):
        raise DomainError("beta density evaluated outside (0, 1)")
    out = (alpha - 1.0) * np.log(t) + (beta - 1.0) * np.log1p(-t) - betaln(alpha, beta)
    return out if out.ndim else float(out)


def _suff_stats(log_t, log_1mt, gamma):
    """Per-cluster responsibility mass and weighted log moments."""
    n_c = gamma.sum(axis=0)
    s_logt = gamma.T @ log_t
    s_log1mt = gamma.T @ log_1mt
    return n_c, s_logt, s_log1mt


def cdll(tbar: np.ndarray, gamma: np.ndarray, mix: BetaMixture) -> float:
    """Expected complete-data log-likelihood at fixed responsibilities."""
    t = np.asarray(tbar, dtype=float).ravel()
    g = gamma.reshape(-1, mix.n_layers)
    if g.shape[0] != t.shape[0]:
        raise ShapeError("responsibilities do not match the data")
    n_c, s_logt, s_log1mt = _suff_stats(np.log(t), np.log1p(-t), g)
    prior_term = float(n_c @ np.log(np.maximum(mix.pi, 1e-300)))
    shape_term = float(
        (mix.alpha - 1.0) @ s_logt
        + (mix.beta - 1.0) @ s_log1mt
        - n_c @ betaln(mix.alpha, mix.beta)
    )
    return prior_term + shape_term


def cdll_grads(tbar: np.ndarray, gamma: np.ndarray, mix: BetaMixture):
    """Gradients of the expected CDLL w.r.t. each cluster's (alpha, beta).

    d/d alpha_c = sum_i gamma_ic [log t_i - psi(alpha_c) + psi(alpha_c + beta_c)]
    d/d beta_c  = sum_i gamma_ic [log(1 - t_i) - psi(beta_c) + psi(alpha_c + beta_c)]
    """
    t = np.asarray(tbar, dtype=float).ravel()
    g = gamma.reshape(-1, mix.n_layers)
    n_c, s_logt, s_log1mt = _suff_stats(np.log(t), np.log1p(-t), g)
    psi_sum = digamma(mix.alpha + mix.beta)
    d_alpha = s_logt - n_c * (digamma(mix.alpha) - psi_sum)
    d_beta = s_log1mt - n_c * (digamma(mix.beta) - psi_sum)
    return d_alpha, d_beta


def _moment_init(t: np.ndarray, n_layers: int) -> BetaMixture:
    """Method-of-moments on quantile slices of the data, uniform priors."""
    t_sorted = np.sort(t)
    chunks = np.array_split(t_sorted, n_layers)
    alpha = np.empty(n_layers)
    beta = np.empty(n_layers)
    for c, chunk in enumerate(chunks):
        m = float(chunk.mean())
        v = max(float(chunk.var()), 1e-6)
        common = max(m * (1.0 - m) / v - 1.0, 1e-2)
        alpha[c] = np.clip(m * common, PARAM_LO, PARAM_HI)
        beta[c] = np.clip((1.0 - m) * common, PARAM_LO, PARAM_HI)
    return BetaMixture(pi=np.full(n_layers, 1.0 / n_layers), alpha=alpha, beta=beta)


def _log_densities(log_t, log_1mt, mix):
    a = mix.alpha[None, :]
    b = mix.beta[None, :]
    return (a - 1.0) * log_t[:, None] + (b - 1.0) * log_1mt[:, None] - betaln(a, b)


def _ascend_shapes(n_c, s_logt, s_log1mt, alpha, beta, step0=1e-3, max_steps=50):
    """Backtracking projected gradient ascent on the shape part of the CDLL."""

    def value(a, b):
        return float((a - 1.0) @ s_logt + (b - 1.0) @ s_log1mt - n_c @ betaln(a, b))

    cur = value(alpha, beta)
    for _ in range(max_steps):
        psi_sum = digamma(alpha + beta)
        g_a = s_logt - n_c * (digamma(alpha) - psi_sum)
        g_b = s_log1mt - n_c * (digamma(beta) - psi_sum)
        step = step0
        improved = False
        while step > 1e-14:
            a_new = np.clip(alpha + step * g_a, PARAM_LO, PARAM_HI)
            b_new = np.clip(beta + step * g_b, PARAM_LO, PARAM_HI)
            new = value(a_new, b_new)
            if new >= cur:
                improved = new > cur + 1e-12 * max(1.0, abs(cur))
                alpha, beta, cur = a_new, b_new, new
                break
            step *= 0.5
        if not improved:
            break
    return alpha, beta


def em_fit(
    tbar: np.ndarray,
    n_layers: int,
    init: BetaMixture | None = None,
    max_iter: int = 200,
    tol: float = 1e-6,
    trace_csv=None,
):
    """Fit a beta mixture to normalized temperatures.

    Returns ``(mixture, responsibilities, loglik_trace)``.  The trace is
    the marginal log-likelihood after each E-step; it is nondecreasing.
    Clusters are ordered warmest-first (largest mean), matching the
    physical lowest-layer-first convention.

    ``trace_csv`` optionally dumps one row per iteration with the
    objective and the current parameters.
    """
    t = np.asarray(tbar, dtype=float)
    shape = t.shape
    t = t.ravel()
    n = t.size
    if n_layers < 1:
        raise DomainError("layer count must be >= 1")
    if n_layers > n:
        raise DomainError(f"more layers ({n_layers}) than pixels ({n})")
    if np.any(t <= 0) or np.any(t >= 1):
        raise DomainError("normalized temperatures must lie strictly inside (0, 1)")

    mix = init if init is not None else _moment_init(t, n_layers)
    if mix.n_layers != n_layers:
        raise ShapeError(f"init has {mix.n_layers} layers, expected {n_layers}")

    log_t = np.log(t)
    log_1mt = np.log1p(-t)
    trace = []
    rows = []
    gamma = np.full((n, n_layers), 1.0 / n_layers)
    for _ in range(max_iter):
        log_dens = _log_densities(log_t, log_1mt, mix)
        log_joint = log_dens + np.log(np.maximum(mix.pi, 1e-300))[None, :]
        log_marg = logsumexp(log_joint, axis=1)
        loglik = float(log_marg.sum())
        if not np.isfinite(loglik):
            raise NumericalError("non-finite mixture log-likelihood")
        gamma = np.exp(log_joint - log_marg[:, None])
        trace.append(loglik)
        if trace_csv is not None:
            rows.append([loglik, *mix.pi, *mix.alpha, *mix.beta])
        if len(trace) > 1 and abs(trace[-1] - trace[-2]) < tol * n:
            break

        n_c, s_logt, s_log1mt = _suff_stats(log_t, log_1mt, gamma)
        alpha, beta = _ascend_shapes(n_c, s_logt, s_log1mt, mix.alpha.copy(), mix.beta.copy())
        mix = BetaMixture(pi=n_c / n, alpha=alpha, beta=beta)

    order = np.argsort(-mix.means(), kind="stable")
    mix = BetaMixture(pi=mix.pi[order], alpha=mix.alpha[order], beta=mix.beta[order])
    gamma = gamma[:, order]

    if trace_csv is not None:
        header = (
            ["loglik"]
            + [f"pi_{c}" for c in range(n_layers)]
            + [f"alpha_{c}" for c in range(n_layers)]
            + [f"beta_{c}" for c in range(n_layers)]
        )
        with open(trace_csv, "w") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(f"{v:.9g}" for v in row) + "\n")

    return mix, gamma.reshape(*shape, n_layers), np.asarray(trace)


def layer_mean_heights(
    gamma: np.ndarray, heights: np.ndarray, mask: np.ndarray
) -> np.ndarray:
    """Responsibility-weighted mean height of each layer over cloud pixels."""
    gamma = np.asarray(gamma, dtype=float)
    heights = np.asarray(heights, dtype=float)
    mask = np.asarray(mask)
    if gamma.shape[:-1] != heights.shape or heights.shape != mask.shape:
        raise ShapeError(
            f"shape mismatch: gamma {gamma.shape}, heights {heights.shape}, mask {mask.shape}"
        )
    w = gamma * mask[..., None]
    denom = w.sum(axis=(0, 1))
    if np.any(denom <= 0):
        bad = int(np.argmin(denom))
        raise EmptyLayerError(f"layer {bad} has no cloud support")
    return (w * heights[..., None]).sum(axis=(0, 1)) / denom
