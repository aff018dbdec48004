"""Reference parameter sets used by the simulation studies and tests."""

from __future__ import annotations

import numpy as np

from .model import ModelParams

_Q1 = [[-2.0, 1.2, 0.8], [0.2, -0.4, 0.2], [1.2, 1.8, -3.0]]
_Q2 = [[-3.0, 2.4, 0.6], [0.2, -0.4, 0.2], [0.4, 1.6, -2.0]]
_Q3 = [[-4.0, 1.6, 2.4], [0.2, -0.4, 0.2], [3.0, 2.0, -5.0]]


def three_regime_benchmark() -> ModelParams:
    """Three-state, three-regime benchmark model used throughout the
    Monte Carlo studies."""
    return ModelParams(
        alpha=np.array([1 / 3, 1 / 3, 1 / 3]),
        phi=np.array([[0.5, 0.3, 0.2], [0.25, 0.55, 0.2], [0.6, 0.1, 0.3]]),
        Q=np.array([_Q1, _Q2, _Q3]),
    )


def two_regime_benchmark() -> ModelParams:
    """Two-regime variant: same alpha and first two generators, regime-1
    selection probabilities (0.5, 0.25, 0.6) per state."""
    phi1 = np.array([0.5, 0.25, 0.6])
    return ModelParams(
        alpha=np.array([1 / 3, 1 / 3, 1 / 3]),
        phi=np.column_stack([phi1, 1.0 - phi1]),
        Q=np.array([_Q1, _Q2]),
    )
