"""Weighted epsilon-SVR machinery: kernels, dual QP solver, flow penalties.

The dual problems are solved in the (alpha, alpha*) variables by
maximal-violating-pair coordinate updates with second-order pair
selection, one equality constraint per output block.  Per-sample box
limits carry the sample weights.  The flow-constrained variant augments
the dual quadratic with PSD penalties assembled from finite-difference
divergence/curl operators applied to the extrapolated grid field; an
increasing penalty schedule drives both toward zero while the QP stays
convex, and achieved values are always reported, never assumed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError, NumericalError, ShapeError, SolverError
from .fieldviz import div_curl, wmae_rows

C_GRID = (1.0, 5.0, 10.0, 20.0, 40.0, 80.0)
EPS_GRID = (0.05, 0.1, 0.2, 0.35, 0.5)
GAMMA_GRID = (0.5, 1.0, 3.78, 5.61, 13.92)
BETA_GRID = (1.0, 8.34, 44.8)

_TINY_BOX = 1e-15  # samples with zero weight are frozen out of the QP


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family and hyperparameters: linear, rbf or poly."""

    kind: str = "linear"
    gamma: float = 1.0
    beta_off: float = 1.0
    degree: int = 2

    def __post_init__(self):
        if self.kind not in ("linear", "rbf", "poly"):
            raise ConfigError(f"unknown kernel kind {self.kind!r}")
        if self.kind in ("rbf", "poly") and self.gamma <= 0:
            raise ConfigError("kernel gamma must be positive")
        if self.kind == "poly" and self.degree < 1:
            raise ConfigError("polynomial degree must be >= 1")


def kernel_eval(spec: KernelSpec, x: np.ndarray, xp: np.ndarray) -> float:
    """Kernel value between two coordinate vectors."""
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    if x.shape != xp.shape:
        raise ShapeError(f"coordinate dimensions differ: {x.shape} vs {xp.shape}")
    if spec.kind == "linear":
        return float(x @ xp)
    if spec.kind == "rbf":
        d = x - xp
        return float(np.exp(-spec.gamma * (d @ d)))
    return float((spec.gamma * (x @ xp) + spec.beta_off) ** spec.degree)


def gram(spec: KernelSpec, x: np.ndarray, xp: np.ndarray | None = None) -> np.ndarray:
    """Gram matrix K[i, j] = k(x_i, xp_j); symmetric PSD in the square case."""
    x = np.asarray(x, dtype=float)
    xp = x if xp is None else np.asarray(xp, dtype=float)
    if spec.kind == "linear":
        return x @ xp.T
    if spec.kind == "rbf":
        sq = (
            (x * x).sum(axis=1)[:, None]
            + (xp * xp).sum(axis=1)[None, :]
            - 2.0 * (x @ xp.T)
        )
        return np.exp(-spec.gamma * np.maximum(sq, 0.0))
    return (spec.gamma * (x @ xp.T) + spec.beta_off) ** spec.degree


@dataclass(frozen=True)
class SolverOptions:
    """Stopping controls for the pairwise dual solver."""

    tol: float = 1e-6  # max KKT violation across output blocks
    max_iter: int = 10_000  # pair updates before SolverError


@dataclass(frozen=True)
class PenaltySchedule:
    """Increasing flow-penalty weights for the constrained variant."""

    mu0: float = 1e-2
    factor: float = 10.0
    rounds: int = 4
    tol_flow: float = 1e-3  # mean |div|, |curl| per grid pixel

    def weights(self):
        return [self.mu0 * self.factor**r for r in range(self.rounds)]


@dataclass
class SVRModel:
    """Fitted dual regressor: prediction is K(x, support) @ dual + bias."""

    spec: KernelSpec
    support_x: np.ndarray  # (N, 2)
    dual: np.ndarray  # (N, D) beta = alpha - alpha*
    bias: np.ndarray  # (D,)
    c_reg: float
    epsilon: float
    sample_weights: np.ndarray  # (N,) per-row z (pre-stacking)
    targets: np.ndarray  # (N, D) training targets, kept for KKT checks
    box: np.ndarray  # (N*D,) per-dual box limit in stacking order
    diagnostics: dict = field(default_factory=dict)


def predict(model: SVRModel, coords: np.ndarray) -> np.ndarray:
    """Evaluate the fitted function(s) at coordinate rows, (P, D)."""
    k = gram(model.spec, np.asarray(coords, dtype=float), model.support_x)
    return k @ model.dual + model.bias[None, :]


def grid_coords(shape: tuple[int, int], step: int = 1) -> np.ndarray:
    """(x, y) rows for every ``step``-th pixel of an (M, N) grid, row-major."""
    m, n = shape
    ys, xs = np.mgrid[0:m:step, 0:n:step]
    return np.column_stack([xs.ravel().astype(float), ys.ravel().astype(float)])


def extrapolate(model: SVRModel, shape: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    """Extrapolate a two-output model to the full frame as (U, V) grids."""
    if model.dual.shape[1] != 2:
        raise ShapeError("extrapolate expects a two-output model")
    out = predict(model, grid_coords(shape))
    return out[:, 0].reshape(shape), out[:, 1].reshape(shape)


def _solve_beta(q, y, eps, box, blocks, options, warm=None):
    """Minimize 0.5 b'Qb - y'b + eps|b|_1 s.t. per-block sum(b)=0, |b_i|<=box_i.

    Internally works on a = [alpha; alpha*] >= 0 with b = alpha - alpha*.
    Returns (beta, bias per block, pair-update count).
    """
    p = y.shape[0]
    a = np.zeros(2 * p)
    if warm is not None:
        a[:p] = np.maximum(warm, 0.0)
        a[p:] = np.maximum(-warm, 0.0)
    beta = a[:p] - a[p:]
    qb = q @ beta
    cbox = np.concatenate([box, box])
    diag = np.diag(q)

    def scores():
        # score_t = -s_t * g_t with g the gradient of the a-form objective
        g_alpha = qb - y + eps
        g_star = -(qb - y) + eps
        return np.concatenate([-g_alpha, g_star])

    iters = 0
    while True:
        sc = scores()
        up = np.concatenate([a[:p] < cbox[:p] - _TINY_BOX, a[p:] > _TINY_BOX])
        low = np.concatenate([a[:p] > _TINY_BOX, a[p:] < cbox[p:] - _TINY_BOX])
        up &= cbox > _TINY_BOX
        low &= cbox > _TINY_BOX

        worst = None
        for block in blocks:
            tids = np.concatenate([block, block + p])
            b_up = tids[up[tids]]
            b_low = tids[low[tids]]
            if b_up.size == 0 or b_low.size == 0:
                continue
            i = b_up[np.argmax(sc[b_up])]
            gap = sc[i] - sc[b_low].min()
            if worst is None or gap > worst[0]:
                worst = (gap, i, b_low)
        if worst is None or worst[0] <= options.tol:
            break
        if iters >= options.max_iter:
            raise SolverError(
                f"dual solver exceeded {options.max_iter} pair updates "
                f"(KKT gap {worst[0]:.3e} > tol {options.tol:.1e})"
            )
        iters += 1

        _, t1, cand = worst
        i1 = t1 % p
        s1 = 1.0 if t1 < p else -1.0
        # second-order choice of the partner: largest decrease estimate
        c_idx = cand[sc[cand] < sc[t1]]
        if c_idx.size == 0:
            break
        cb = c_idx % p
        eta = np.maximum(diag[i1] + diag[cb] - 2.0 * q[i1, cb], 1e-12)
        delta = sc[t1] - sc[c_idx]
        t2 = c_idx[np.argmax(delta * delta / eta)]
        i2 = t2 % p
        s2 = 1.0 if t2 < p else -1.0
        sigma = s1 * s2

        g1 = -s1 * sc[t1]
        g2 = -s2 * sc[t2]
        eta12 = max(q[i1, i1] + q[i2, i2] - 2.0 * q[i1, i2], 1e-12)
        slope = g1 - sigma * g2
        u_lo = max(-a[t1], (a[t2] - cbox[t2]) if sigma > 0 else -a[t2])
        u_hi = min(cbox[t1] - a[t1], a[t2] if sigma > 0 else cbox[t2] - a[t2])
        u = float(np.clip(-slope / eta12, u_lo, u_hi))
        if u == 0.0:
            # blocked at the box; no progress possible along this pair
            break
        a[t1] += u
        a[t2] -= sigma * u
        db1 = s1 * u
        qb += q[:, i1] * db1 - q[:, i2] * db1
        beta[i1] += db1
        beta[i2] -= db1

    bias = np.array([_block_bias(qb, y, eps, a, cbox, block, p) for block in blocks])
    return beta, bias, iters


def _block_bias(qb, y, eps, a, cbox, block, p):
    """Prediction bias for one output block from the KKT interval midpoint."""
    lo, hi = [], []
    for t in np.concatenate([block, block + p]):
        i = t % p
        c_t = cbox[t]
        if c_t <= _TINY_BOX:
            continue
        s = 1.0 if t < p else -1.0
        g = s * (qb[i] - y[i]) + eps
        val = g if s > 0 else -g
        at_zero = a[t] <= 1e-9 * c_t
        at_cap = a[t] >= c_t * (1.0 - 1e-9)
        if s > 0:
            if at_cap or not at_zero:
                lo.append(val)
            if at_zero or not at_cap:
                hi.append(val)
        else:
            if at_zero or not at_cap:
                lo.append(val)
            if at_cap or not at_zero:
                hi.append(val)
    if not lo and not hi:
        return 0.0
    if not lo:
        nu = min(hi)
    elif not hi:
        nu = max(lo)
    else:
        nu = 0.5 * (max(lo) + min(hi))
    return -nu


def solve_wsvr(
    x: np.ndarray,
    y: np.ndarray,
    z: np.ndarray,
    c_reg: float,
    epsilon: float,
    spec: KernelSpec,
    options: SolverOptions = SolverOptions(),
) -> SVRModel:
    """Weighted single-output epsilon-SVR; per-sample box c_i = z_i * C / N."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    z = np.asarray(z, dtype=float).ravel()
    n = y.shape[0]
    if n < 2:
        raise DomainError("need at least two samples")
    if c_reg <= 0 or epsilon < 0:
        raise DomainError("require C > 0 and epsilon >= 0")
    if x.shape[0] != n or z.shape[0] != n:
        raise ShapeError("x, y and z must have aligned rows")
    k = gram(spec, x)
    box = z * (c_reg / n)
    beta, bias, _ = _solve_beta(k, y, epsilon, box, [np.arange(n)], options)
    return SVRModel(
        spec=spec,
        support_x=x,
        dual=beta[:, None],
        bias=bias,
        c_reg=c_reg,
        epsilon=epsilon,
        sample_weights=z,
        targets=y[:, None],
        box=box,
    )


def _mo_problem(x, v, z, c_reg, spec):
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    z = np.asarray(z, dtype=float).ravel()
    n = x.shape[0]
    if v.shape != (n, 2) or z.shape[0] != n:
        raise ShapeError("expected (N, 2) targets aligned with coords and weights")
    if n < 2:
        raise DomainError("need at least two samples")
    k = gram(spec, x)
    q = np.zeros((2 * n, 2 * n))
    q[:n, :n] = k
    q[n:, n:] = k
    y = np.concatenate([v[:, 0], v[:, 1]])
    box = np.concatenate([z, z]) * (c_reg / (2 * n))
    blocks = [np.arange(n), np.arange(n, 2 * n)]
    return k, q, y, box, blocks, n


def solve_mo_wsvm(
    x: np.ndarray,
    v: np.ndarray,
    z: np.ndarray,
    c_reg: float,
    epsilon: float,
    spec: KernelSpec,
    options: SolverOptions = SolverOptions(),
) -> SVRModel:
    """Two-output weighted SVR on the block-diagonal Gram.

    Targets stack as [u; v]; extended weights (z; z) give per-dual boxes
    c_i = C * z_i / (2N); each output keeps its own equality constraint.
    """
    if c_reg <= 0 or epsilon < 0:
        raise DomainError("require C > 0 and epsilon >= 0")
    _, q, y, box, blocks, n = _mo_problem(x, v, z, c_reg, spec)
    beta, bias, _ = _solve_beta(q, y, epsilon, box, blocks, options)
    return SVRModel(
        spec=spec,
        support_x=np.asarray(x, dtype=float),
        dual=np.column_stack([beta[:n], beta[n:]]),
        bias=bias,
        c_reg=c_reg,
        epsilon=epsilon,
        sample_weights=np.asarray(z, dtype=float).ravel(),
        targets=np.asarray(v, dtype=float),
        box=box,
    )


def assemble_flow_penalty(
    spec: KernelSpec,
    support_x: np.ndarray,
    shape: tuple[int, int],
    step: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """PSD quadratic penalties whose value equals the squared grid div/curl.

    The extrapolated field is linear in the stacked duals, so divergence
    and curl on the evaluation grid are linear maps L @ beta (bias terms
    difference away); the penalties are L'L for each map.  ``step``
    decimates the evaluation grid to bound memory on large frames.
    """
    coords = grid_coords(shape, step)
    mg = len(range(0, shape[0], step))
    ng = len(range(0, shape[1], step))
    k_g = gram(spec, coords, np.asarray(support_x, dtype=float))
    n = k_g.shape[1]
    stacks = k_g.reshape(mg, ng, n)
    dx = np.zeros_like(stacks)
    dx[:, :-1, :] = stacks[:, 1:, :] - stacks[:, :-1, :]
    dy = np.zeros_like(stacks)
    dy[:-1, :, :] = stacks[1:, :, :] - stacks[:-1, :, :]
    dx = dx.reshape(-1, n)
    dy = dy.reshape(-1, n)
    l_div = np.hstack([dx, dy])
    l_curl = np.hstack([-dy, dx])
    return l_div.T @ l_div, l_curl.T @ l_curl


def solve_mo_wsvm_fc(
    x: np.ndarray,
    v: np.ndarray,
    z: np.ndarray,
    c_reg: float,
    epsilon: float,
    spec: KernelSpec,
    shape: tuple[int, int],
    schedule: PenaltySchedule = PenaltySchedule(),
    penalty_step: int = 1,
    options: SolverOptions = SolverOptions(),
) -> SVRModel:
    """Two-output SVR with divergence/curl driven toward zero.

    Solves the multi-output dual repeatedly with the quadratic flow
    penalties scaled by an increasing mu, warm-starting each round, until
    the extrapolated grid's mean |div| and |curl| drop below the schedule
    tolerance or the rounds are exhausted.  Achieved values land in
    ``diagnostics``.
    """
    _, q0, y, box, blocks, n = _mo_problem(x, v, z, c_reg, spec)
    p_div, p_curl = assemble_flow_penalty(spec, x, shape, step=penalty_step)
    penalty = p_div + p_curl

    beta = None
    model = None
    for mu in schedule.weights():
        q = q0 + 2.0 * mu * penalty
        beta, bias, _ = _solve_beta(q, y, epsilon, box, blocks, options, warm=beta)
        model = SVRModel(
            spec=spec,
            support_x=np.asarray(x, dtype=float),
            dual=np.column_stack([beta[:n], beta[n:]]),
            bias=bias,
            c_reg=c_reg,
            epsilon=epsilon,
            sample_weights=np.asarray(z, dtype=float).ravel(),
            targets=np.asarray(v, dtype=float),
            box=box,
        )
        u_grid, v_grid = extrapolate(model, shape)
        div, curl = div_curl(u_grid, v_grid)
        model.diagnostics = {
            "mu": mu,
            "div_mean": float(np.abs(div).mean()),
            "curl_mean": float(np.abs(curl).mean()),
            "div_sum": float(np.abs(div).sum()),
            "curl_sum": float(np.abs(curl).sum()),
        }
        if (
            model.diagnostics["div_mean"] < schedule.tol_flow
            and model.diagnostics["curl_mean"] < schedule.tol_flow
        ):
            break
    return model


def kkt_report(model: SVRModel) -> dict:
    """Feasibility and complementary-slackness violations of a fitted model.

    equality: per-output |sum beta|; box: worst overshoot; slackness:
    largest |beta| among rows strictly inside the epsilon tube.
    """
    n, d = model.dual.shape
    pred = predict(model, model.support_x)
    resid = model.targets - pred
    box = model.box.reshape(d, n).T  # stacking order was per-output
    eq = [abs(float(model.dual[:, out].sum())) for out in range(d)]
    box_violation = float(np.maximum(np.abs(model.dual) - box, 0.0).max())
    inside = np.abs(resid) < model.epsilon - 1e-9
    slack_violation = float(np.abs(model.dual[inside]).max()) if inside.any() else 0.0
    return {
        "equality": eq,
        "box": box_violation,
        "slackness": slack_violation,
    }


@dataclass(frozen=True)
class CVResult:
    spec: KernelSpec
    c_reg: float
    epsilon: float
    score: float
    table: tuple


def _grid_specs(kind, gamma_grid, beta_grid, degree):
    if kind == "linear":
        return [KernelSpec(kind="linear")]
    if kind == "rbf":
        return [KernelSpec(kind="rbf", gamma=g) for g in gamma_grid]
    return [
        KernelSpec(kind="poly", gamma=g, beta_off=b, degree=degree)
        for g, b in itertools.product(gamma_grid, beta_grid)
    ]


def cross_validate(
    x: np.ndarray,
    v: np.ndarray,
    z: np.ndarray,
    kind: str = "linear",
    c_grid=C_GRID,
    eps_grid=EPS_GRID,
    gamma_grid=GAMMA_GRID,
    beta_grid=BETA_GRID,
    degree: int = 2,
    n_folds: int = 3,
    seed: int = 0,
    options: SolverOptions = SolverOptions(),
) -> CVResult:
    """Grid search with k-fold CV; the score is mean validation WMAE.

    Grid points are visited in ascending (C, eps, gamma, beta) order and
    only a strictly better score displaces the incumbent, so ties resolve
    to the smallest C then smallest eps.
    """
    if len(c_grid) == 0 or len(eps_grid) == 0:
        raise ConfigError("empty hyperparameter grid")
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    z = np.asarray(z, dtype=float).ravel()
    n = x.shape[0]
    if n < 2 * n_folds:
        raise DomainError(f"too few rows ({n}) for {n_folds}-fold CV")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    folds = np.array_split(perm, n_folds)

    specs = _grid_specs(kind, sorted(gamma_grid), sorted(beta_grid), degree)
    best = None
    table = []
    for c_reg in sorted(c_grid):
        for eps in sorted(eps_grid):
            for spec in specs:
                scores = []
                for f in range(n_folds):
                    val = folds[f]
                    train = np.concatenate([folds[g] for g in range(n_folds) if g != f])
                    model = solve_mo_wsvm(
                        x[train], v[train], z[train], c_reg, eps, spec, options
                    )
                    pred = predict(model, x[val])
                    scores.append(wmae_rows(pred, v[val], z[val]))
                score = float(np.mean(scores))
                table.append((c_reg, eps, spec, score))
                if best is None or score < best.score:
                    best = CVResult(
                        spec=spec, c_reg=c_reg, epsilon=eps, score=score, table=()
                    )
    return CVResult(
        spec=best.spec, c_reg=best.c_reg, epsilon=best.epsilon, score=best.score,
        table=tuple(table),
    )


@dataclass(frozen=True)
class RidgeModel:
    """Kernel ridge baseline with independent outputs and no bias."""

    spec: KernelSpec
    support_x: np.ndarray
    coef: np.ndarray  # (N, 2)


def mo_rr_fit(x: np.ndarray, v: np.ndarray, reg: float, spec: KernelSpec) -> RidgeModel:
    """Closed-form dual ridge: coef = (K + reg I)^-1 V per output."""
    if reg <= 0:
        raise DomainError("ridge regularization must be positive")
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    k = gram(spec, x)
    eye = np.eye(k.shape[0])
    for attempt in (0, 1):
        try:
            coef = np.linalg.solve(k + reg * eye + (1e-10 * attempt) * eye, v)
        except np.linalg.LinAlgError:
            coef = None
        if coef is not None and np.all(np.isfinite(coef)):
            return RidgeModel(spec=spec, support_x=x, coef=coef)
    raise NumericalError("ridge system remained ill-conditioned after jitter")


def ridge_predict(model: RidgeModel, coords: np.ndarray) -> np.ndarray:
    return gram(model.spec, np.asarray(coords, dtype=float), model.support_x) @ model.coef
