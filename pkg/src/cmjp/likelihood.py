"""Path likelihoods, regime posteriors, and distributional-law operations.

All likelihood arithmetic is carried out in log-space with log-sum-exp;
a regime that assigns probability zero to an observed transition gets
log-likelihood -inf and posterior weight 0.  The convention 0*log(0) = 0
applies throughout.
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from .exceptions import DegeneratePosteriorError
from .matcore import mat_exp
from .model import ModelParams, SufficientStats, stack_stats


def _log_rates(Q: np.ndarray) -> np.ndarray:
    """Elementwise log of the off-diagonal rates; zeros map to 0 (used only
    where the paired count is zero) and are masked to -inf separately."""
    with np.errstate(divide="ignore"):
        logq = np.where(Q > 0, np.log(np.where(Q > 0, Q, 1.0)), 0.0)
    return logq


def loglik_matrix(B: np.ndarray, N: np.ndarray, T: np.ndarray, params: ModelParams) -> np.ndarray:
    """(K, M) matrix of per-regime path log-likelihoods, alpha and phi excluded.

    Entry [k, m] is sum_{x, y != x} N_xy log q_{xy,m} - q_{x,m} T_x for path k,
    or -inf when the path contains a transition with zero rate under regime m.
    """
    M, p = params.Q.shape[0], params.Q.shape[1]
    K = N.shape[0]
    logq = _log_rates(params.Q)
    N_flat = N.reshape(K, p * p)
    L = N_flat @ logq.reshape(M, p * p).T - T @ params.exit_rates.T
    impossible = (N_flat > 0) @ (params.Q.reshape(M, p * p) <= 0).T
    L[impossible > 0] = -np.inf
    return L


def posterior_matrix(B: np.ndarray, N: np.ndarray, T: np.ndarray, params: ModelParams) -> np.ndarray:
    """(K, M) posterior regime weights for fully observed censored paths."""
    L = loglik_matrix(B, N, T, params)
    start = B.argmax(axis=1)
    with np.errstate(divide="ignore"):
        logw = np.log(params.phi)[start] + L
    bad = np.all(np.isinf(logw) & (logw < 0), axis=1)
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise DegeneratePosteriorError(f"all regimes assign probability zero to path index {k}")
    logw -= logsumexp(logw, axis=1, keepdims=True)
    return np.exp(logw)


def regime_logliks(stats: SufficientStats, params: ModelParams) -> np.ndarray:
    """Per-regime log-likelihood of one path, excluding the alpha factor."""
    B, N, T = stack_stats([stats])
    return loglik_matrix(B, N, T, params)[0]


def switching_posterior(
    prefix_stats: SufficientStats,
    residual: tuple[int, float],
    params: ModelParams,
) -> np.ndarray:
    """Posterior regime weights given a path prefix and the running sojourn.

    ``residual`` is (current 1-based state, time already spent there); the
    prefix statistics cover completed sojourns only.  The alpha factor
    cancels in the Bayes update and is omitted.
    """
    x, dt = residual
    if dt < 0:
        raise ValueError(f"residual time must be nonnegative, got {dt}")
    L = regime_logliks(prefix_stats, params)
    with np.errstate(divide="ignore"):
        logw = np.log(params.phi[prefix_stats.start_state - 1]) + L - params.exit_rates[:, x - 1] * dt
    if np.all(np.isinf(logw) & (logw < 0)):
        raise DegeneratePosteriorError("all regimes assign probability zero to the observed prefix")
    logw -= logsumexp(logw)
    return np.exp(logw)


def posterior_weights(stats: SufficientStats, params: ModelParams) -> np.ndarray:
    """Posterior regime weights of one full censored path.

    Equivalent to ``switching_posterior`` at the end of observation: the
    occupation times already include the censored final sojourn.
    """
    B, N, T = stack_stats([stats])
    return posterior_matrix(B, N, T, params)[0]


def observed_loglik(stats: list[SufficientStats], params: ModelParams) -> float:
    """Observed-data log-likelihood of independent paths, alpha included."""
    if len(stats) == 0:
        raise ValueError("need at least one path")
    B, N, T = stack_stats(stats)
    L = loglik_matrix(B, N, T, params)
    start = B.argmax(axis=1)
    with np.errstate(divide="ignore"):
        logw = np.log(params.phi)[start] + L
        per_path = logsumexp(logw, axis=1)
        log_alpha = np.log(params.alpha)[start]
    if np.any(np.isinf(per_path)):
        k = int(np.flatnonzero(np.isinf(per_path))[0])
        raise DegeneratePosteriorError(f"path index {k} has zero likelihood under every regime")
    return float(np.sum(log_alpha + per_path))


def alpha_mle(stats: list[SufficientStats]) -> np.ndarray:
    """Empirical initial-state distribution over all paths."""
    if len(stats) == 0:
        raise ValueError("need at least one path")
    B = np.stack([st.b for st in stats])
    return B.mean(axis=0)


def conditional_transition(
    posterior: np.ndarray, x: int, dt: float, params: ModelParams
) -> np.ndarray:
    """Transition law P{X(t+dt) = . | X(t) = x, history} as a probability vector.

    Mixes the per-regime matrix-exponential rows with the posterior regime
    weights.  With a single regime this is just a row of exp(Q dt).
    """
    posterior = np.asarray(posterior, dtype=float)
    rows = np.stack([mat_exp(params.Q[m], dt)[x - 1] for m in range(params.M)])
    return posterior @ rows


def holding_survival(posterior: np.ndarray, x: int, du: float, params: ModelParams) -> float:
    """P{no jump within the next du time units | current state x, history}."""
    if du < 0:
        raise ValueError(f"duration must be nonnegative, got {du}")
    posterior = np.asarray(posterior, dtype=float)
    q = params.exit_rates[:, x - 1]
    return float(np.sum(posterior * np.exp(-q * du)))


def joint_jump(posterior: np.ndarray, x: int, du: float, y: int, params: ModelParams) -> float:
    """P{jump within du and land in y | current state x, history}, y != x."""
    if y == x:
        raise ValueError("target state must differ from the current state")
    if du < 0:
        raise ValueError(f"duration must be nonnegative, got {du}")
    posterior = np.asarray(posterior, dtype=float)
    q = params.exit_rates[:, x - 1]
    qxy = params.Q[:, x - 1, y - 1]
    with np.errstate(invalid="ignore", divide="ignore"):
        pi = np.where(q > 0, qxy / np.where(q > 0, q, 1.0), 0.0)
    return float(np.sum(posterior * (1.0 - np.exp(-q * du)) * pi))
