"""Dense small-dimension matrix kernels.

Matrix exponential, the exact integral of a matrix exponential via block
augmentation, the principal matrix square root, and inversion.  All inputs
are tiny (p <= 10 in practice), so the implementations favour robustness
over speed and lean on scipy/numpy LAPACK-backed routines.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm

from .exceptions import NumericalError, SingularMatrixError

GENERATOR_TOL = 1e-12


def check_generator(Q: np.ndarray) -> np.ndarray:
    """Validate a transition-intensity (generator) matrix.

    A generator has nonnegative off-diagonal entries, nonpositive diagonal,
    and zero row sums within ``GENERATOR_TOL`` (scaled by the matrix norm).

    Returns the input as a float array; raises ``ValueError`` otherwise.
    """
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or Q.shape[0] < 1:
        raise ValueError(f"generator must be a square matrix, got shape {Q.shape}")
    if not np.all(np.isfinite(Q)):
        raise ValueError("generator has non-finite entries")
    scale = max(1.0, float(np.abs(Q).max()))
    off = Q - np.diag(np.diag(Q))
    if off.min() < -GENERATOR_TOL * scale:
        raise ValueError("generator has a negative off-diagonal entry")
    if np.diag(Q).max() > GENERATOR_TOL * scale:
        raise ValueError("generator has a positive diagonal entry")
    rowsums = Q.sum(axis=1)
    if np.abs(rowsums).max() > GENERATOR_TOL * scale * Q.shape[0]:
        raise ValueError(f"generator row sums are not zero (max |sum| = {np.abs(rowsums).max():.3e})")
    return Q


def mat_exp(Q: np.ndarray, t: float) -> np.ndarray:
    """Transition matrix ``exp(Q t)`` of a Markov jump process.

    Parameters
    ----------
    Q : (p, p) array
        Generator matrix.
    t : float
        Nonnegative, finite time.

    Returns
    -------
    (p, p) array
        Stochastic matrix with entries clamped to [0, 1].
    """
    Q = check_generator(Q)
    if not np.isfinite(t) or t < 0:
        raise ValueError(f"time must be finite and nonnegative, got {t}")
    if t == 0.0:
        return np.eye(Q.shape[0])
    P = expm(Q * t)
    # floating-point residue only; true entries are probabilities
    return np.clip(P, 0.0, 1.0)


def van_loan_integral(Q: np.ndarray, T: float) -> np.ndarray:
    """Exact integral ``int_0^T exp(Q u) du``.

    Computed from the exponential of the augmented block matrix
    ``[[Q, I], [0, 0]]`` scaled by ``T``: the top-right block of the result
    is the integral.
    """
    Q = check_generator(Q)
    if not np.isfinite(T) or T < 0:
        raise ValueError(f"time must be finite and nonnegative, got {T}")
    p = Q.shape[0]
    block = np.zeros((2 * p, 2 * p))
    block[:p, :p] = Q
    block[:p, p:] = np.eye(p)
    E = expm(block * T)
    return E[:p, p:]


def principal_sqrt(A: np.ndarray) -> np.ndarray:
    """Principal square root of a diagonalizable matrix.

    Requires all eigenvalues to have strictly positive real part and a
    well-conditioned eigenvector basis.  The result S satisfies S @ S = A
    and itself has eigenvalues with positive real part.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    eigvals, eigvecs = np.linalg.eig(A)
    scale = max(1.0, float(np.abs(eigvals).max()))
    if np.any(eigvals.real <= 1e-12 * scale):
        raise NumericalError(
            f"principal square root requires eigenvalues with positive real part, got {eigvals}"
        )
    cond = np.linalg.cond(eigvecs)
    if not np.isfinite(cond) or 1.0 / cond < 1e-10:
        raise NumericalError(
            f"matrix is not diagonalizable within tolerance (eigenvector condition {cond:.3e})"
        )
    S = (eigvecs @ np.diag(np.sqrt(eigvals.astype(complex))) @ np.linalg.inv(eigvecs)).real
    residual = np.abs(S @ S - A).max()
    if residual > 1e-10 * scale:
        raise NumericalError(f"square-root residual {residual:.3e} exceeds tolerance")
    return S


def invert(A: np.ndarray) -> np.ndarray:
    """Inverse of a well-conditioned square matrix.

    Raises ``SingularMatrixError`` when the reciprocal condition number
    falls below 1e-12.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or 1.0 / cond < 1e-12:
        raise SingularMatrixError(f"matrix is numerically singular (condition number {cond:.3e})")
    return np.linalg.inv(A)
