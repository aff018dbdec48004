"""Parameter and data containers, validation, and sufficient statistics.

States are 1-based in every external format; arrays are indexed 0-based
internally.  A model bundles the initial-state law ``alpha``, the per-state
regime-selection probabilities ``phi`` (one row per state), and one
intensity matrix per regime.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .exceptions import ValidationError
from .matcore import GENERATOR_TOL

PROB_TOL = 1e-12


@dataclass(frozen=True)
class ModelParams:
    """Full parameter set of a regime-switching jump process.

    Attributes
    ----------
    alpha : (p,) array
        Initial-state probabilities.
    phi : (p, M) array
        Row x holds the regime-selection probabilities for paths starting
        in state x+1.
    Q : (M, p, p) array
        One generator matrix per regime, units 1/time.
    """

    alpha: np.ndarray
    phi: np.ndarray
    Q: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alpha", np.asarray(self.alpha, dtype=float))
        object.__setattr__(self, "phi", np.asarray(self.phi, dtype=float))
        object.__setattr__(self, "Q", np.asarray(self.Q, dtype=float))

    @property
    def p(self) -> int:
        return self.alpha.shape[0]

    @property
    def M(self) -> int:
        return self.phi.shape[1]

    @property
    def exit_rates(self) -> np.ndarray:
        """(M, p) array of exit rates q_{x,m} = -q_{xx,m}."""
        return -np.einsum("mxx->mx", self.Q)

    def with_regime_order(self, order) -> "ModelParams":
        """Reorder regimes by the given permutation of 0..M-1."""
        order = list(order)
        return replace(self, phi=self.phi[:, order], Q=self.Q[order])


@dataclass(frozen=True)
class Path:
    """One continuously observed trajectory.

    ``times`` are the epoch times starting at 0, ``states`` the 1-based
    visited states, and ``horizon`` the censoring time.
    """

    id: int
    times: np.ndarray
    states: np.ndarray
    horizon: float
    regimes: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "states", np.asarray(self.states, dtype=int))
        if self.regimes is not None:
            object.__setattr__(self, "regimes", np.asarray(self.regimes, dtype=int))

    @property
    def n_jumps(self) -> int:
        return len(self.times) - 1


@dataclass(frozen=True)
class SufficientStats:
    """Per-path counts: initial-state indicator, transition counts, occupation times."""

    b: np.ndarray
    n: np.ndarray
    t_occ: np.ndarray

    @property
    def start_state(self) -> int:
        """1-based initial state."""
        return int(np.argmax(self.b)) + 1


def _check_prob_vector(v: np.ndarray, what: str, errors: list[str]) -> None:
    if v.min() < -PROB_TOL:
        errors.append(f"{what} has a negative entry ({v.min():.3e})")
    if abs(v.sum() - 1.0) > PROB_TOL * max(1, len(v)):
        errors.append(f"{what} sums to {v.sum():.12g}, expected 1")


def validate_model(params: ModelParams) -> ModelParams:
    """Check every model invariant; return the model unchanged if valid.

    Raises ``ValidationError`` listing each violated invariant with its
    field path.
    """
    errors: list[str] = []
    alpha, phi, Q = params.alpha, params.phi, params.Q
    if alpha.ndim != 1:
        raise ValidationError(f"alpha must be a vector, got shape {alpha.shape}")
    p = alpha.shape[0]
    if phi.ndim != 2 or phi.shape[0] != p:
        raise ValidationError(f"phi must have shape (p, M) = ({p}, M), got {phi.shape}")
    M = phi.shape[1]
    if Q.ndim != 3 or Q.shape != (M, p, p):
        raise ValidationError(f"Q must have shape (M, p, p) = ({M}, {p}, {p}), got {Q.shape}")
    if not (np.all(np.isfinite(alpha)) and np.all(np.isfinite(phi)) and np.all(np.isfinite(Q))):
        raise ValidationError("model contains non-finite entries")

    _check_prob_vector(alpha, "alpha", errors)
    for x in range(p):
        _check_prob_vector(phi[x], f"phi row {x + 1}", errors)
    for m in range(M):
        Qm = Q[m]
        scale = max(1.0, float(np.abs(Qm).max()))
        for x in range(p):
            row = Qm[x]
            off = np.delete(row, x)
            if off.size and off.min() < -GENERATOR_TOL * scale:
                errors.append(f"Q[{m + 1}] row {x + 1} has a negative off-diagonal rate")
            if row[x] > GENERATOR_TOL * scale:
                errors.append(f"Q[{m + 1}] row {x + 1} has a positive diagonal entry")
            if abs(row.sum()) > GENERATOR_TOL * scale * p:
                errors.append(f"Q[{m + 1}] row {x + 1} sums to {row.sum():.6g}")
    if errors:
        raise ValidationError("; ".join(errors))
    return params


def validate_path(path: Path, p: int) -> Path:
    """Check the path invariants against a state count ``p``."""
    errors: list[str] = []
    t, s = path.times, path.states
    if len(t) != len(s) or len(t) < 1:
        raise ValidationError(f"path {path.id}: times and states must have equal positive length")
    if t[0] != 0.0:
        errors.append("first epoch time must be 0")
    if len(t) > 1 and np.diff(t).min() <= 0:
        errors.append("epoch times must be strictly increasing")
    if t[-1] > path.horizon:
        errors.append("last epoch time exceeds the horizon")
    if s.min() < 1 or s.max() > p:
        errors.append(f"states must lie in 1..{p}")
    if len(s) > 1 and np.any(s[1:] == s[:-1]):
        errors.append("consecutive states must differ")
    if errors:
        raise ValidationError(f"path {path.id}: " + "; ".join(errors))
    return path


def embedded_chain(Q_m: np.ndarray) -> np.ndarray:
    """Transition matrix of the embedded jump chain of one regime.

    Rows with zero exit rate (absorbing states) are left all-zero; the
    simulator decides their semantics.
    """
    Q_m = np.asarray(Q_m, dtype=float)
    p = Q_m.shape[0]
    pi = np.zeros_like(Q_m)
    for x in range(p):
        qx = -Q_m[x, x]
        if qx > 0:
            pi[x] = Q_m[x] / qx
            pi[x, x] = 0.0
    return pi


def path_stats(path: Path, p: int) -> SufficientStats:
    """Sufficient statistics (B, N, T) of one censored path.

    The final sojourn is censored at the horizon and accumulates into the
    occupation time of the last visited state.
    """
    validate_path(path, p)
    s = path.states - 1
    b = np.zeros(p)
    b[s[0]] = 1.0
    n = np.zeros((p, p))
    np.add.at(n, (s[:-1], s[1:]), 1.0)
    t_occ = np.zeros(p)
    ends = np.append(path.times[1:], path.horizon)
    np.add.at(t_occ, s, ends - path.times)
    return SufficientStats(b=b, n=n, t_occ=t_occ)


def stack_stats(stats: list[SufficientStats]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack per-path statistics into (K, p), (K, p, p), (K, p) arrays."""
    B = np.stack([st.b for st in stats])
    N = np.stack([st.n for st in stats])
    T = np.stack([st.t_occ for st in stats])
    return B, N, T


# --- flattened free-parameter layout ---------------------------------------
#
# Order: phi_{x,m} for x = 1..p, m = 1..M-1 (row order), then q_{xy,m} for
# m = 1..M, x = 1..p, y != x in row-major order.  phi_{x,M} is derived, never
# a free parameter; alpha is estimated separately and excluded.


def param_dim(p: int, M: int) -> int:
    return p * (M - 1) + M * p * (p - 1)


def param_names(p: int, M: int) -> list[str]:
    names = [f"phi[{x},{m}]" for x in range(1, p + 1) for m in range(1, M)]
    names += [
        f"q[{x},{y},{m}]"
        for m in range(1, M + 1)
        for x in range(1, p + 1)
        for y in range(1, p + 1)
        if y != x
    ]
    return names


def to_vector(params: ModelParams) -> np.ndarray:
    """Flatten the free parameters (phi columns 1..M-1, then all rates)."""
    p, M = params.p, params.M
    phi_part = params.phi[:, : M - 1].ravel()
    off = ~np.eye(p, dtype=bool)
    q_part = params.Q[:, off].ravel()
    return np.concatenate([phi_part, q_part])


def from_vector(vec: np.ndarray, p: int, M: int, alpha: np.ndarray) -> ModelParams:
    """Rebuild a model from a flat free-parameter vector and ``alpha``."""
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (param_dim(p, M),):
        raise ValueError(f"expected vector of length {param_dim(p, M)}, got {vec.shape}")
    n_phi = p * (M - 1)
    phi = np.empty((p, M))
    phi[:, : M - 1] = vec[:n_phi].reshape(p, M - 1)
    phi[:, M - 1] = 1.0 - phi[:, : M - 1].sum(axis=1)
    off = ~np.eye(p, dtype=bool)
    Q = np.zeros((M, p, p))
    Q[:, off] = vec[n_phi:].reshape(M, p * (p - 1))
    diag = -Q.sum(axis=2)
    for m in range(M):
        np.fill_diagonal(Q[m], diag[m])
    return ModelParams(alpha=np.asarray(alpha, dtype=float), phi=phi, Q=Q)
