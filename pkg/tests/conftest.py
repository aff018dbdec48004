import numpy as np
import pytest

from cmjp import ModelParams, three_regime_benchmark, two_regime_benchmark


@pytest.fixture(scope="session")
def benchmark():
    return three_regime_benchmark()


@pytest.fixture(scope="session")
def two_regime():
    return two_regime_benchmark()


def random_model(rng: np.random.Generator, p: int, M: int) -> ModelParams:
    """A random valid model with all entries bounded away from zero."""
    alpha = rng.dirichlet(np.full(p, 5.0))
    phi = rng.dirichlet(np.full(M, 5.0), size=p)
    Q = np.zeros((M, p, p))
    for m in range(M):
        for x in range(p):
            row = rng.uniform(0.2, 3.0, size=p)
            row[x] = 0.0
            Q[m, x] = row
            Q[m, x, x] = -row.sum()
    return ModelParams(alpha=alpha, phi=phi, Q=Q)
