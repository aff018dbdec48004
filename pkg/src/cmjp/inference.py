"""Observed and expected Fisher information, asymptotic covariance,
normality testing, and the Monte Carlo study harness.

Parameter layout everywhere follows the flat free-parameter vector of
``model``: the regime probabilities phi_{x,m} for m = 1..M-1 (the last
column is derived), then all off-diagonal rates.  The phi blocks of the
observed information are contracted onto the free parameters via the
substitution phi_{x,M} = 1 - sum_{m<M} phi_{x,m}, so the matrix equals the
negative Hessian of the observed log-likelihood in the free coordinates.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .em import FitConfig, fit_stats
from .exceptions import NumericalError, SingularMatrixError
from .likelihood import posterior_matrix
from .matcore import invert, principal_sqrt, van_loan_integral
from .model import (
    ModelParams,
    SufficientStats,
    param_dim,
    param_names,
    stack_stats,
    to_vector,
)
from .simulate import RngStream, simulate_conditional

ZERO_EXCLUSION_TOL = 1e-8


@dataclass(frozen=True)
class FisherMatrix:
    """Symmetric information matrix over an explicit parameter list."""

    params: list[str]
    matrix: np.ndarray


@dataclass(frozen=True)
class ParameterSummary:
    name: str
    true_value: float
    mean_estimate: float
    bias: float
    rmse: float
    empirical_se: float
    mean_model_se: float
    ks_pvalue: float


@dataclass(frozen=True)
class StudyReport:
    parameters: list[ParameterSummary]
    n_replications: int
    paths_per_replication: int
    horizon: float
    seed: int
    failed_replications: int = 0


def _posterior_and_residuals(stats, theta: ModelParams):
    B, N, T = stack_stats(stats)
    W = posterior_matrix(B, N, T, theta)
    # A[k, m, x, y] = N_xy^k - q_xy,m T_x^k
    A = N[:, None, :, :] - theta.Q[None] * T[:, None, :, None]
    return B, N, T, W, A


def observed_fisher(stats: list[SufficientStats], theta_hat: ModelParams) -> FisherMatrix:
    """Observed information J_p at the MLE over the free parameters.

    Parameters whose estimate is below the zero-exclusion threshold are
    dropped from the layout (their rows would be singular); the retained
    names are listed in the result.
    """
    p, M = theta_hat.p, theta_hat.M
    B, N, T, W, A = _posterior_and_residuals(stats, theta_hat)
    phi = theta_hat.phi
    Q = theta_hat.Q

    names = param_names(p, M)
    full = to_vector(theta_hat)
    keep = np.abs(full) >= ZERO_EXCLUSION_TOL

    n_phi = p * (M - 1)
    d = param_dim(p, M)
    J = np.zeros((d, d))

    started = B > 0  # (K, p) indicator
    if M > 1:
        used_states = started.any(axis=0)
        if np.any(phi[used_states] < ZERO_EXCLUSION_TOL):
            raise NumericalError(
                "phi has a (near-)zero entry for an observed start state; "
                "the closed-form information is undefined there"
            )
        # ratio of posterior weight to prior probability, per start state
        with np.errstate(divide="ignore", invalid="ignore"):
            G = W[:, None, :] / phi[None, :, :]  # (K, p, M); only rows with B_x=1 used
        D = G[:, :, : M - 1] - G[:, :, M - 1 : M]  # free-phi score factors

        # phi-phi block: same-state only
        for x in range(p):
            mask = started[:, x]
            if not mask.any():
                continue
            Dx = D[mask, x, :]  # (Kx, M-1)
            rows = slice(x * (M - 1), (x + 1) * (M - 1))
            J[rows, rows] = Dx.T @ Dx

    # index map for the q part
    q_index = {}
    i = n_phi
    for m in range(M):
        for x in range(p):
            for y in range(p):
                if y != x:
                    q_index[(m, x, y)] = i
                    i += 1

    # q-q block
    with np.errstate(divide="ignore", invalid="ignore"):
        S = np.where(Q[None] != 0, A / np.where(Q[None] != 0, Q[None], 1.0), 0.0)
    # S[k, m, x, y] = A / q; score of q_xy,m per path is W[k,m] * S[k,m,x,y]
    for (m, x, y), i in q_index.items():
        if not keep[i]:
            continue
        for (n, xx, yy), j in q_index.items():
            if j < i or not keep[j]:
                continue
            coupling = W[:, n] * ((1.0 if m == n else 0.0) - W[:, m])
            val = -np.sum(coupling * S[:, n, xx, yy] * S[:, m, x, y])
            if i == j:
                val += np.sum(W[:, m] * N[:, x, y]) / Q[m, x, y] ** 2
            J[i, j] = val
            J[j, i] = val

    # phi-q block (contracted onto free phi)
    for x in range(p) if M > 1 else []:
        mask = started[:, x]
        if not mask.any():
            continue
        for mi in range(M - 1):
            i = x * (M - 1) + mi
            if not keep[i]:
                continue
            for (n, xx, yy), j in q_index.items():
                if not keep[j]:
                    continue
                coeff = W[mask, n] * (
                    ((1.0 if mi == n else 0.0) - W[mask, mi]) / phi[x, mi]
                    - ((1.0 if M - 1 == n else 0.0) - W[mask, M - 1]) / phi[x, M - 1]
                )
                val = -np.sum(coeff * S[mask, n, xx, yy])
                J[i, j] = val
                J[j, i] = val

    kept_names = [nm for nm, k in zip(names, keep) if k]
    return FisherMatrix(params=kept_names, matrix=J[np.ix_(keep, keep)])


def observed_score(stats: list[SufficientStats], theta: ModelParams) -> np.ndarray:
    """Gradient of the observed log-likelihood in the free parameters,
    via the posterior-weighted complete-data score."""
    p, M = theta.p, theta.M
    B, N, T, W, A = _posterior_and_residuals(stats, theta)
    phi = theta.phi
    score = np.zeros(param_dim(p, M))
    with np.errstate(divide="ignore", invalid="ignore"):
        G = W[:, None, :] / phi[None, :, :]
    for x in range(p):
        mask = B[:, x] > 0
        for mi in range(M - 1):
            score[x * (M - 1) + mi] = np.sum(G[mask, x, mi] - G[mask, x, M - 1])
    i = p * (M - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        S = np.where(theta.Q[None] != 0, A / np.where(theta.Q[None] != 0, theta.Q[None], 1.0), 0.0)
    for m in range(M):
        for x in range(p):
            for y in range(p):
                if y != x:
                    score[i] = np.sum(W[:, m] * S[:, m, x, y])
                    i += 1
    return score


def standard_errors(J: FisherMatrix) -> np.ndarray:
    """Per-parameter standard errors sqrt(diag(J^-1)) for the retained layout."""
    try:
        Jinv = invert(J.matrix)
    except SingularMatrixError as exc:
        raise SingularMatrixError(f"information matrix singular despite zero-exclusion: {exc}") from exc
    diag = np.diag(Jinv)
    if diag.min() < 0:
        raise NumericalError("information matrix inverse has a negative diagonal entry")
    return np.sqrt(diag)


def _check_nonzero(model: ModelParams) -> None:
    off = ~np.eye(model.p, dtype=bool)
    if model.alpha.min() <= 0 or model.phi.min() <= 0 or model.Q[:, off].min() <= 0:
        raise NumericalError("closed-form information requires alpha, phi and all rates nonzero")


def expected_fisher_complete(model: ModelParams, horizon: float) -> FisherMatrix:
    """Expected complete-data information I_c over (free phi, q).

    Block diagonal: the phi block couples regimes within a state only; the
    q block is diagonal with entries built from the integrated matrix
    exponential of the regime's generator.
    """
    _check_nonzero(model)
    p, M = model.p, model.M
    d = param_dim(p, M)
    I = np.zeros((d, d))
    for x in range(p):
        for mi in range(M - 1):
            for ni in range(M - 1):
                I[x * (M - 1) + mi, x * (M - 1) + ni] = (
                    model.alpha[x] / model.phi[x, mi] * ((1.0 if mi == ni else 0.0) - model.phi[x, mi])
                )
    i = p * (M - 1)
    for m in range(M):
        integral = van_loan_integral(model.Q[m], horizon)
        occupancy = (model.alpha * model.phi[:, m]) @ integral  # alpha^T S_m int e^{Qu} du
        for x in range(p):
            for y in range(p):
                if y != x:
                    I[i, i] = occupancy[x] / model.Q[m, x, y]
                    i += 1
    return FisherMatrix(params=param_names(p, M), matrix=I)


def asymptotic_covariance(model: ModelParams, horizon: float) -> FisherMatrix:
    """Asymptotic covariance of the scaled estimation error, same layout."""
    _check_nonzero(model)
    p, M = model.p, model.M
    d = param_dim(p, M)
    C = np.zeros((d, d))
    for x in range(p):
        for ni in range(M - 1):
            for mi in range(M - 1):
                C[x * (M - 1) + ni, x * (M - 1) + mi] = (
                    model.phi[x, ni] / model.alpha[x] * ((1.0 if mi == ni else 0.0) - model.phi[x, mi])
                )
    i = p * (M - 1)
    for m in range(M):
        integral = van_loan_integral(model.Q[m], horizon)
        occupancy = (model.alpha * model.phi[:, m]) @ integral
        for x in range(p):
            for y in range(p):
                if y != x:
                    C[i, i] = model.Q[m, x, y] / occupancy[x]
                    i += 1
    return FisherMatrix(params=param_names(p, M), matrix=C)


def cramer_rao(model: ModelParams, horizon: float) -> dict:
    """Cramer-Rao inverse bound and its comparison with the MLE covariance.

    The bound is the blockwise inverse of the expected complete-data
    information: per-state block inverses for the regime-selection
    parameters and reciprocal diagonal entries for the rates, for which
    the bound equals the covariance exactly.  The report carries the
    Loewner check (smallest eigenvalue of bound minus covariance), the
    q-block discrepancy, and a secondary phi bound from the square-root
    identity [Sigma_phi I_c,phi]^{1/2} I_c,phi^{-1} (diag(phi/alpha) in
    the two-regime case).
    """
    p, M = model.p, model.M
    Ic = expected_fisher_complete(model, horizon)
    Sigma = asymptotic_covariance(model, horizon)
    d = param_dim(p, M)
    bound = np.zeros((d, d))
    n_phi = p * (M - 1)
    sqrt_bound = np.zeros((n_phi, n_phi))
    for x in range(p):
        rows = slice(x * (M - 1), (x + 1) * (M - 1))
        Sx = Sigma.matrix[rows, rows]
        Ix = Ic.matrix[rows, rows]
        Ix_inv = invert(Ix)
        bound[rows, rows] = Ix_inv
        sqrt_bound[rows, rows] = principal_sqrt(Sx @ Ix) @ Ix_inv
    q_diag = np.diag(Ic.matrix)[n_phi:]
    bound[n_phi:, n_phi:] = np.diag(1.0 / q_diag)

    phi_diff = bound[:n_phi, :n_phi] - Sigma.matrix[:n_phi, :n_phi]
    min_eig = float(np.linalg.eigvalsh((phi_diff + phi_diff.T) / 2.0).min()) if n_phi else 0.0
    q_gap = float(np.abs(bound[n_phi:, n_phi:] - Sigma.matrix[n_phi:, n_phi:]).max())
    return {
        "params": Ic.params,
        "inverse_bound": bound,
        "phi_bound_sqrt_identity": sqrt_bound,
        "covariance": Sigma.matrix,
        "expected_complete_fisher": Ic.matrix,
        "phi_loewner_min_eigenvalue": min_eig,
        "q_block_max_abs_diff": q_gap,
        "superefficient_phi": min_eig >= -1e-9,
    }


def ks_normal_test(samples) -> tuple[float, float]:
    """One-sample Kolmogorov-Smirnov test against the standard normal.

    Returns the statistic D and the asymptotic p-value from the Kolmogorov
    series of sqrt(n) D.
    """
    z = np.sort(np.asarray(samples, dtype=float))
    n = len(z)
    if n == 0:
        raise ValueError("need at least one sample")
    cdf = ndtr(z)
    upper = np.arange(1, n + 1) / n - cdf
    lower = cdf - np.arange(0, n) / n
    D = float(max(upper.max(), lower.max()))
    stat = math.sqrt(n) * D
    if stat <= 0:
        return D, 1.0
    total = 0.0
    for j in range(1, 101):
        term = 2.0 * (-1.0) ** (j - 1) * math.exp(-2.0 * j * j * stat * stat)
        total += term
        if abs(term) < 1e-12 and j >= 3:
            break
    return D, float(min(max(total, 0.0), 1.0))


def _match_to_truth(theta: ModelParams, truth: ModelParams) -> ModelParams:
    """Permute regime labels to be closest to the true rates."""
    M = theta.M
    best, best_cost = None, np.inf
    for perm in itertools.permutations(range(M)):
        cost = float(np.abs(theta.Q[list(perm)] - truth.Q).sum())
        if cost < best_cost:
            best, best_cost = perm, cost
    return theta.with_regime_order(list(best))


def monte_carlo_study(
    true_model: ModelParams,
    n_replications: int,
    paths_per_replication: int,
    horizon: float,
    config: FitConfig,
    seed: int = 0,
) -> StudyReport:
    """Repeated simulate-and-fit study of estimator bias, RMSE and SEs.

    Each replication simulates paths from the true model, fits by EM,
    canonicalizes regime labels against the truth, and records the free
    parameters and their information-based standard errors.  Aggregates
    per parameter: bias, RMSE, empirical SE (RMSE^2 - bias^2), mean
    model-based SE, and the KS p-value of the standardized estimates.
    """
    from .model import path_stats  # local import to avoid cycle at module load

    K = paths_per_replication
    d = param_dim(true_model.p, true_model.M)
    names = param_names(true_model.p, true_model.M)
    truth_vec = to_vector(true_model)
    estimates = np.full((n_replications, d), np.nan)
    model_ses = np.full((n_replications, d), np.nan)
    failures = 0
    for r in range(n_replications):
        stats = []
        for k in range(K):
            sp = simulate_conditional(true_model, horizon, RngStream(seed, r * K + k))
            stats.append(path_stats(sp.path, true_model.p))
        cfg = FitConfig(
            M=true_model.M,
            tol=config.tol,
            max_iter=config.max_iter,
            seed=seed * 1_000_003 + r,
            restarts=config.restarts,
        )
        try:
            result = fit_stats(stats, cfg)
            theta = _match_to_truth(result.theta_hat, true_model)
            estimates[r] = to_vector(theta)
            J = observed_fisher(stats, theta)
            ses = standard_errors(J)
            se_map = dict(zip(J.params, ses))
            model_ses[r] = [se_map.get(nm, np.nan) for nm in names]
        except Exception:
            failures += 1
            estimates[r] = np.nan
            model_ses[r] = np.nan

    ok = ~np.isnan(estimates[:, 0])
    est = estimates[ok]
    records = []
    for i, nm in enumerate(names):
        col = est[:, i]
        bias = float(col.mean() - truth_vec[i])
        rmse = float(np.sqrt(np.mean((col - truth_vec[i]) ** 2)))
        emp_se = float(np.sqrt(max(rmse**2 - bias**2, 0.0)))
        sd = col.std(ddof=0)
        if sd > 0:
            z = (col - col.mean()) / sd
            _, ks_p = ks_normal_test(z)
        else:
            ks_p = 0.0
        se_col = model_ses[ok][:, i]
        mean_se = float(np.nanmean(se_col)) if np.any(~np.isnan(se_col)) else float("nan")
        records.append(
            ParameterSummary(
                name=nm,
                true_value=float(truth_vec[i]),
                mean_estimate=float(col.mean()),
                bias=bias,
                rmse=rmse,
                empirical_se=emp_se,
                mean_model_se=mean_se,
                ks_pvalue=float(ks_p),
            )
        )
    return StudyReport(
        parameters=records,
        n_replications=n_replications,
        paths_per_replication=K,
        horizon=horizon,
        seed=seed,
        failed_replications=failures,
    )
