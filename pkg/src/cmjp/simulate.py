"""Exact path generation.

Two equivalent-in-law constructions are provided: the conditional recursion
(regime re-drawn at every epoch from the path-dependent posterior) and the
mixture construction (regime drawn once at time zero).  Both consume an
explicit reproducible uniform-variate stream; identical (seed, stream id)
pairs give bit-identical paths.

Variate discipline: the initial state consumes U_0; every epoch n then
consumes exactly one W_n (regime), one V_n (sojourn), and one U_{n+1}
(next state), in that order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ModelParams, Path, embedded_chain

_BLOCK = 4096


class RngStream:
    """Buffered stream of uniform variates on [0, 1).

    Distinct stream ids under the same seed yield statistically independent
    sequences (numpy SeedSequence spawn keys).
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = seed
        self.stream = stream
        self._gen = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(stream,)))
        self._buf: list[float] = []
        self._pos = 0

    def uniform(self) -> float:
        if self._pos >= len(self._buf):
            self._buf = self._gen.random(_BLOCK).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u


@dataclass(frozen=True)
class SimulatedPath:
    """A generated path plus its (normally unobservable) regime trace.

    ``regimes`` has one entry per epoch for conditional mode and a single
    entry for mixture mode.
    """

    path: Path
    regimes: np.ndarray
    mode: str


def sample_categorical(probs, u: float) -> int:
    """Invert the CDF of a categorical law: 1-based index k with
    sum_{i<k} probs[i] <= u < sum_{i<=k} probs[i]."""
    if not 0.0 <= u < 1.0:
        raise ValueError(f"uniform variate must lie in [0, 1), got {u}")
    total = math.fsum(probs)
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {total}, expected 1")
    c = 0.0
    last_positive = 0
    for i, pi in enumerate(probs):
        if pi > 0:
            last_positive = i
        c += pi
        if u < c:
            return i + 1
    # u fell into the rounding gap between c and 1
    return last_positive + 1


class _Tables:
    """Per-regime lookup tables in plain Python lists for the hot loop."""

    def __init__(self, model: ModelParams):
        p, M = model.p, model.M
        self.p, self.M = p, M
        self.alpha = model.alpha.tolist()
        self.log_phi = [
            [math.log(v) if v > 0 else -math.inf for v in row] for row in model.phi
        ]
        self.exit = model.exit_rates.tolist()  # [m][x]
        self.cum_pi = [np.cumsum(embedded_chain(Qm), axis=1).tolist() for Qm in model.Q]
        with np.errstate(divide="ignore"):
            logq = np.where(model.Q > 0, np.log(np.where(model.Q > 0, model.Q, 1.0)), -np.inf)
        self.log_q = logq.tolist()  # [m][x][y]

    def draw_state(self, cum_row: list[float], u: float) -> int:
        for y, c in enumerate(cum_row):
            if u < c:
                return y
        return len(cum_row) - 1

    def draw_initial(self, u: float) -> int:
        c = 0.0
        for x, a in enumerate(self.alpha):
            c += a
            if u < c:
                return x
        return self.p - 1


def _softmax_draw(logw: list[float], w: float) -> int:
    mx = max(logw)
    weights = [math.exp(v - mx) for v in logw]
    total = sum(weights)
    c = 0.0
    target = w * total
    for m, wt in enumerate(weights):
        c += wt
        if target < c:
            return m
    return max(range(len(weights)), key=lambda m: weights[m])


def simulate_conditional(model: ModelParams, horizon: float, rng: RngStream) -> SimulatedPath:
    """Generate one path under the conditional recursion.

    At every epoch the switching posterior is recomputed from the realized
    prefix (in log-space, incremental over completed sojourns; the alpha
    factor cancels) and the regime for the next sojourn drawn from it.
    """
    if horizon <= 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    tb = _Tables(model)
    x = tb.draw_initial(rng.uniform())
    log_phi0 = tb.log_phi[x]
    loglik = [0.0] * tb.M  # per-regime log f of the completed prefix
    t = 0.0
    times = [0.0]
    states = [x + 1]
    regimes: list[int] = []
    while True:
        logw = [lp + ll for lp, ll in zip(log_phi0, loglik)]
        m = _softmax_draw(logw, rng.uniform())
        regimes.append(m + 1)
        v = rng.uniform()
        qx = tb.exit[m][x]
        if qx <= 0.0:
            break  # absorbing under the selected regime: censor at horizon
        dt = -math.log(1.0 - v) / qx
        if t + dt > horizon:
            break
        u = rng.uniform()
        y = tb.draw_state(tb.cum_pi[m][x], u)
        for mm in range(tb.M):
            loglik[mm] += tb.log_q[mm][x][y] - tb.exit[mm][x] * dt
        t += dt
        x = y
        times.append(t)
        states.append(x + 1)
    path = Path(id=rng.stream, times=np.array(times), states=np.array(states), horizon=horizon)
    return SimulatedPath(path=path, regimes=np.array(regimes), mode="conditional")


def simulate_mixture(model: ModelParams, horizon: float, rng: RngStream) -> SimulatedPath:
    """Generate one path under the mixture construction.

    The regime is drawn once from phi given the initial state; the path then
    follows a plain Markov jump process with the selected generator.
    """
    if horizon <= 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    tb = _Tables(model)
    x = tb.draw_initial(rng.uniform())
    m = _softmax_draw(tb.log_phi[x], rng.uniform())
    t = 0.0
    times = [0.0]
    states = [x + 1]
    while True:
        v = rng.uniform()
        qx = tb.exit[m][x]
        if qx <= 0.0:
            break
        dt = -math.log(1.0 - v) / qx
        if t + dt > horizon:
            break
        u = rng.uniform()
        x = tb.draw_state(tb.cum_pi[m][x], u)
        t += dt
        times.append(t)
        states.append(x + 1)
    path = Path(id=rng.stream, times=np.array(times), states=np.array(states), horizon=horizon)
    return SimulatedPath(path=path, regimes=np.array([m + 1]), mode="mixture")


def simulate_paths(
    model: ModelParams,
    n_paths: int,
    horizon: float,
    seed: int,
    mode: str = "conditional",
    first_stream: int = 0,
) -> list[SimulatedPath]:
    """Generate ``n_paths`` independent paths, one RNG substream each."""
    if mode not in ("conditional", "mixture"):
        raise ValueError(f"unknown mode {mode!r}")
    sim = simulate_conditional if mode == "conditional" else simulate_mixture
    return [sim(model, horizon, RngStream(seed, first_stream + k)) for k in range(n_paths)]


def state_distribution_at(
    model: ModelParams,
    times: list[float],
    n_paths: int,
    seed: int,
    mode: str,
    first_stream: int = 0,
) -> np.ndarray:
    """Empirical distribution of X(t) on a time grid, shape (len(times), p).

    Avoids materializing the paths; used for large-sample distributional
    equivalence checks between the two simulators.
    """
    horizon = max(times) + 1e-9
    grid = sorted(times)
    counts = np.zeros((len(grid), model.p), dtype=np.int64)
    sim = simulate_conditional if mode == "conditional" else simulate_mixture
    for k in range(n_paths):
        sp = sim(model, horizon, RngStream(seed, first_stream + k))
        t, s = sp.path.times, sp.path.states
        idx = np.searchsorted(t, grid, side="right") - 1
        for gi, pi in enumerate(idx):
            counts[gi, s[pi] - 1] += 1
    order = np.argsort(np.argsort(times))
    return counts[order] / n_paths
