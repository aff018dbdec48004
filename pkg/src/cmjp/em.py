"""EM estimation with closed-form M-step, and AIC model selection.

The E-step computes posterior regime weights per path; the M-step updates
phi and the rates by posterior-weighted closed forms.  Iteration stops on
the Euclidean distance between consecutive free-parameter vectors.
Regimes of a fitted model are sorted by total exit rate so that repeated
fits are comparable despite label-switching symmetry.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .exceptions import EstimationError
from .likelihood import alpha_mle, loglik_matrix, observed_loglik, posterior_matrix
from .model import (
    ModelParams,
    Path,
    SufficientStats,
    param_dim,
    path_stats,
    stack_stats,
    to_vector,
)


@dataclass(frozen=True)
class FitConfig:
    M: int = 1
    tol: float = 1e-5
    max_iter: int = 2000
    seed: int = 0
    restarts: int = 1

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")


@dataclass(frozen=True)
class FitResult:
    theta_hat: ModelParams
    loglik_trace: np.ndarray
    iterations: int
    converged: bool
    posteriors: np.ndarray  # (K, M)
    aic: float

    @property
    def loglik(self) -> float:
        return float(self.loglik_trace[-1])


def _pooled_markov_mle(B: np.ndarray, N: np.ndarray, T: np.ndarray) -> np.ndarray:
    """Markov MLE q_xy = sum N_xy / sum T_x over the given paths."""
    p = B.shape[1]
    N_sum = N.sum(axis=0)
    T_sum = T.sum(axis=0)
    Q = np.zeros((p, p))
    for x in range(p):
        if T_sum[x] > 0:
            Q[x] = N_sum[x] / T_sum[x]
        Q[x, x] = 0.0
        Q[x, x] = -Q[x].sum()
    return Q


def init_params(stats: list[SufficientStats], M: int, rng: np.random.Generator) -> ModelParams:
    """Initialization by random partition into M subsets.

    Each subset is treated as a plain Markov sample to estimate one
    intensity matrix; phi rows start uniform; alpha is the empirical
    initial-state law.  Subset cells without data fall back to the pooled
    all-data Markov MLE.
    """
    K = len(stats)
    if K < M:
        raise EstimationError(f"need at least M={M} paths, got {K}")
    B, N, T = stack_stats(stats)
    p = B.shape[1]
    alpha = B.mean(axis=0)
    pooled = _pooled_markov_mle(B, N, T)

    pooled_off = pooled.copy()
    np.fill_diagonal(pooled_off, 0.0)

    perm = rng.permutation(K)
    size = K // M
    Q = np.zeros((M, p, p))
    for m in range(M):
        idx = perm[m * size :] if m == M - 1 else perm[m * size : (m + 1) * size]
        idx = np.sort(idx)  # fixed summation order: M=1 matches the pooled MLE bit-for-bit
        N_sub = N[idx].sum(axis=0)
        T_sub = T[idx].sum(axis=0)
        for x in range(p):
            if T_sub[x] > 0:
                row = N_sub[x] / T_sub[x]
                row[x] = 0.0
                # keep rates positive where the full sample saw transitions,
                # otherwise a single subset can zero out a feasible jump
                missing = (row == 0) & (pooled_off[x] > 0)
                row[missing] = pooled_off[x, missing]
            else:
                row = pooled_off[x].copy()
            Q[m, x] = row
            Q[m, x, x] = -row.sum()
    phi = np.full((p, M), 1.0 / M)
    return ModelParams(alpha=alpha, phi=phi, Q=Q)


def em_step(stats: list[SufficientStats], theta: ModelParams) -> ModelParams:
    """One EM iteration: posterior weights, then closed-form updates."""
    B, N, T = stack_stats(stats)
    W = posterior_matrix(B, N, T, theta)
    return _m_step(B, N, T, W, theta)


def _m_step(B, N, T, W, theta: ModelParams) -> ModelParams:
    p, M = theta.p, theta.M
    starts = B.sum(axis=0)  # paths starting in each state
    phi = theta.phi.copy()
    num = B.T @ W  # (p, M)
    seen = starts > 0
    phi[seen] = num[seen] / starts[seen, None]

    # plain sums over k so the M=1 case reproduces the Markov MLE bit-for-bit
    WN = (W.T[:, :, None, None] * N[None]).sum(axis=1)  # (M, p, p)
    WT = (W.T[:, :, None] * T[None]).sum(axis=1)  # (M, p)
    Q = np.zeros((M, p, p))
    for m in range(M):
        for x in range(p):
            if WT[m, x] > 0:
                Q[m, x] = WN[m, x] / WT[m, x]
            Q[m, x, x] = 0.0
            Q[m, x, x] = -Q[m, x].sum()
    return replace(theta, phi=phi, Q=Q)


def _sort_regimes(result_theta: ModelParams, W: np.ndarray) -> tuple[ModelParams, np.ndarray]:
    order = np.argsort(result_theta.exit_rates.sum(axis=1), kind="stable")
    return result_theta.with_regime_order(order), W[:, order]


def _run_em(stats, theta0: ModelParams, config: FitConfig):
    B, N, T = stack_stats(stats)
    theta = theta0
    trace = [observed_loglik(stats, theta)]
    converged = False
    iterations = 0
    for _ in range(config.max_iter):
        W = posterior_matrix(B, N, T, theta)
        new = _m_step(B, N, T, W, theta)
        iterations += 1
        trace.append(observed_loglik(stats, new))
        delta = float(np.linalg.norm(to_vector(new) - to_vector(theta)))
        theta = new
        if delta < config.tol:
            converged = True
            break
    W = posterior_matrix(B, N, T, theta)
    return theta, np.array(trace), iterations, converged, W


def fit(
    paths: list[Path],
    config: FitConfig,
    p: int | None = None,
    extra_inits: list[ModelParams] | None = None,
) -> FitResult:
    """Fit an M-regime model by EM, best of ``config.restarts`` random starts.

    ``extra_inits`` adds caller-supplied starting points to the candidate
    pool (used by model selection for warm starts).
    """
    if len(paths) == 0:
        raise EstimationError("need at least one path")
    if p is None:
        p = int(max(path.states.max() for path in paths))
    stats = [path_stats(path, p) for path in paths]
    return fit_stats(stats, config, extra_inits=extra_inits)


def fit_stats(
    stats: list[SufficientStats],
    config: FitConfig,
    extra_inits: list[ModelParams] | None = None,
) -> FitResult:
    """Fit from precomputed per-path sufficient statistics."""
    inits: list[ModelParams] = []
    rng = np.random.default_rng(config.seed)
    for _ in range(config.restarts):
        inits.append(init_params(stats, config.M, rng))
    inits.extend(extra_inits or [])

    best = None
    last_error: Exception | None = None
    for theta0 in inits:
        try:
            theta, trace, iterations, converged, W = _run_em(stats, theta0, config)
        except EstimationError as exc:  # keep trying other starts
            last_error = exc
            continue
        if best is None or trace[-1] > best[1][-1]:
            best = (theta, trace, iterations, converged, W)
    if best is None:
        raise EstimationError(f"every EM start failed: {last_error}")
    theta, trace, iterations, converged, W = best
    theta, W = _sort_regimes(theta, W)
    p = theta.p
    return FitResult(
        theta_hat=theta,
        loglik_trace=trace,
        iterations=iterations,
        converged=converged,
        posteriors=W,
        aic=aic(float(trace[-1]), p, config.M),
    )


def aic(loglik: float, p: int, M: int) -> float:
    """Akaike information criterion: 2 |theta| - 2 log L with
    |theta| = p(M-1) + M p(p-1) free parameters."""
    return 2.0 * param_dim(p, M) - 2.0 * loglik


def _split_regime_init(theta: ModelParams) -> ModelParams:
    """Warm start for M+1 regimes: duplicate the fastest regime and halve its
    phi mass.  Reproduces the M-regime likelihood exactly at iteration zero,
    so the refit can only improve on it."""
    M = theta.M
    idx = int(np.argmax(theta.exit_rates.sum(axis=1)))
    phi = np.column_stack([theta.phi, theta.phi[:, idx] / 2.0])
    phi[:, idx] /= 2.0
    Q = np.concatenate([theta.Q, theta.Q[idx : idx + 1]], axis=0)
    return ModelParams(alpha=theta.alpha, phi=phi, Q=Q)


def select_model(paths: list[Path], M_range: list[int], config: FitConfig) -> list[dict]:
    """Fit each regime count and tabulate (M, loglik, AIC); smallest AIC wins.

    Per-M fit failures are recorded and do not abort the other fits.  Each
    fit after the first also starts from the previous best fit with one
    regime duplicated, which keeps the reported log-likelihood monotone in M.
    """
    rows: list[dict] = []
    p = int(max(path.states.max() for path in paths))
    stats = [path_stats(path, p) for path in paths]
    previous: FitResult | None = None
    for M in sorted(M_range):
        cfg = replace(config, M=M)
        extra = []
        if previous is not None and previous.theta_hat.M == M - 1:
            extra.append(_split_regime_init(previous.theta_hat))
        try:
            result = fit_stats(stats, cfg, extra_inits=extra)
        except (EstimationError, ValueError) as exc:
            rows.append({"M": M, "loglik": None, "aic": None, "error": str(exc)})
            continue
        rows.append({"M": M, "loglik": result.loglik, "aic": result.aic, "error": None, "fit": result})
        previous = result
    scored = [r for r in rows if r["aic"] is not None]
    if scored:
        best = min(scored, key=lambda r: r["aic"])
        for r in rows:
            r["best"] = r is best
    return rows
