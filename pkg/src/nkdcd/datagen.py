"""Synthetic panels with known Granger-causal structure.

Two generators: a sparse VAR(3) in which each series drives itself and one
other series, and the Lorenz-96 system integrated with classical RK4.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numba
import numpy as np


class IntegrationError(RuntimeError):
    pass


@dataclass
class TimeSeriesData:
    """A ``(T, n)`` panel plus optional ``(n, n)`` truth (row = target, col = source)."""

    values: np.ndarray
    truth: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict)
    # generator internals (lag matrices, noise draws); never serialized
    aux: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError(f"values must be a (T, n) matrix, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("values contain non-finite entries")
        if self.truth is not None:
            self.truth = np.asarray(self.truth).astype(np.int64)
            n = self.values.shape[1]
            if self.truth.shape != (n, n):
                raise ValueError(f"truth must be ({n}, {n}), got {self.truth.shape}")

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def standardized(self) -> "TimeSeriesData":
        mu = self.values.mean(axis=0)
        sd = self.values.std(axis=0)
        sd[sd == 0] = 1.0
        meta = dict(self.metadata, standardized=True)
        return TimeSeriesData((self.values - mu) / sd, self.truth, meta)


# ---------------------------------------------------------------------------
# sparse VAR(3)


@dataclass
class Var3Spec:
    n: int = 10
    T: int = 1000
    coupling: float = 0.1
    self_coupling: float = 0.1
    lags: int = 3
    noise_std: float = 0.1
    burn_in: int = 100
    seed: int = 0


def var3_lag_matrices(spec: Var3Spec, rng: np.random.Generator):
    """Lag matrices ``(lags, n, n)`` and truth for the sparse VAR."""
    n = spec.n
    truth = np.eye(n, dtype=np.int64)
    for i in range(n):
        if n > 1:
            j = rng.choice(n - 1)
            j += j >= i
            truth[i, j] = 1
    W = truth.astype(np.float64) * spec.coupling
    np.fill_diagonal(W, spec.self_coupling)
    return np.repeat(W[None], spec.lags, axis=0), truth


def simulate_var(W: np.ndarray, noise: np.ndarray, x0: Optional[np.ndarray] = None) -> np.ndarray:
    """Run ``x_t = sum_l W[l-1] x_{t-l} + noise_t``.

    ``x0`` holds the ``p`` initial states (oldest first); zeros when omitted.
    Returns the full ``(p + len(noise), n)`` trajectory including ``x0``.
    """
    p, n, _ = W.shape
    steps = noise.shape[0]
    x = np.zeros((p + steps, n))
    if x0 is not None:
        x[:p] = x0
    for t in range(p, p + steps):
        acc = noise[t - p].copy()
        for l in range(1, p + 1):
            acc += W[l - 1] @ x[t - l]
        x[t] = acc
    return x


def generate_var(spec: Var3Spec) -> TimeSeriesData:
    if spec.T <= spec.lags:
        raise ValueError(f"T must exceed the lag order {spec.lags}, got {spec.T}")
    rng = np.random.default_rng(spec.seed)
    W, truth = var3_lag_matrices(spec, rng)
    noise = spec.noise_std * rng.standard_normal((spec.burn_in + spec.T, spec.n))
    x = simulate_var(W, noise)[spec.lags + spec.burn_in:]
    meta = {"generator": "var3", "n": spec.n, "T": spec.T, "coupling": spec.coupling,
            "self_coupling": spec.self_coupling, "lags": spec.lags,
            "noise_std": spec.noise_std, "burn_in": spec.burn_in, "seed": spec.seed}
    return TimeSeriesData(x, truth, meta, aux={"lag_matrices": W, "noise": noise[spec.burn_in:]})


# ---------------------------------------------------------------------------
# Lorenz-96


@dataclass
class Lorenz96Spec:
    n: int = 20
    F: float = 10.0
    T: int = 1000
    dt_sample: float = 0.1
    substeps: int = 4000
    burn_in: int = 1000
    init_noise: float = 0.01
    obs_noise: float = 0.0
    seed: int = 0


def lorenz96_deriv(x, F: float) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] < 4:
        raise ValueError(f"Lorenz-96 needs at least 4 variables, got {x.shape[-1]}")
    return (np.roll(x, -1, axis=-1) - np.roll(x, 2, axis=-1)) * np.roll(x, 1, axis=-1) - x + F


@numba.njit(cache=True)
def _deriv_into(x, F, out):
    n = x.shape[0]
    for i in range(n):
        out[i] = (x[(i + 1) % n] - x[(i - 2) % n]) * x[(i - 1) % n] - x[i] + F


@numba.njit(cache=True)
def _rk4_samples(x0, F, samples, h, substeps):
    # Kahan-compensated state update; plain summation lets roundoff, amplified
    # by the positive Lyapunov exponent, swamp the truncation error.
    n = x0.shape[0]
    out = np.empty((samples, n))
    x = x0.copy()
    comp = np.zeros(n)
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    for s in range(samples):
        out[s] = x
        for _ in range(substeps):
            _deriv_into(x, F, k1)
            for i in range(n):
                tmp[i] = x[i] + 0.5 * h * k1[i]
            _deriv_into(tmp, F, k2)
            for i in range(n):
                tmp[i] = x[i] + 0.5 * h * k2[i]
            _deriv_into(tmp, F, k3)
            for i in range(n):
                tmp[i] = x[i] + h * k3[i]
            _deriv_into(tmp, F, k4)
            for i in range(n):
                y = (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) - comp[i]
                t = x[i] + y
                comp[i] = (t - x[i]) - y
                x[i] = t
        if not np.all(np.isfinite(x)):
            return out[:s + 1], s
    return out, -1


def rk4_step(x: np.ndarray, F: float, h: float) -> np.ndarray:
    """One classical RK4 step (reference implementation, uncompensated)."""
    k1 = lorenz96_deriv(x, F)
    k2 = lorenz96_deriv(x + 0.5 * h * k1, F)
    k3 = lorenz96_deriv(x + 0.5 * h * k2, F)
    k4 = lorenz96_deriv(x + h * k3, F)
    return x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate_lorenz96(x0, F: float, samples: int, dt_sample: float = 0.1,
                       substeps: int = 4000) -> np.ndarray:
    """Return ``samples`` states spaced ``dt_sample`` apart, the first being ``x0``."""
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.shape[0] < 4:
        raise ValueError(f"Lorenz-96 needs at least 4 variables, got {x0.shape[0]}")
    out, bad = _rk4_samples(x0, float(F), int(samples), dt_sample / substeps, int(substeps))
    if bad >= 0:
        raise IntegrationError(f"state became non-finite while integrating sample {bad + 1}")
    return out


def lorenz96_truth(n: int) -> np.ndarray:
    truth = np.zeros((n, n), dtype=np.int64)
    for i in range(n):
        for off in (-2, -1, 0, 1):
            truth[i, (i + off) % n] = 1
    return truth


def generate_lorenz96(spec: Lorenz96Spec) -> TimeSeriesData:
    if spec.n < 4:
        raise ValueError(f"Lorenz-96 needs n >= 4, got {spec.n}")
    if spec.T < 1:
        raise ValueError(f"T must be >= 1, got {spec.T}")
    rng = np.random.default_rng(spec.seed)
    x0 = spec.F + rng.uniform(-spec.init_noise, spec.init_noise, size=spec.n)
    traj = integrate_lorenz96(x0, spec.F, spec.burn_in + spec.T, spec.dt_sample, spec.substeps)
    x = traj[spec.burn_in:]
    if spec.obs_noise > 0:
        x = x + spec.obs_noise * rng.standard_normal(x.shape)
    meta = {"generator": "lorenz96", "n": spec.n, "T": spec.T, "F": spec.F,
            "dt_sample": spec.dt_sample, "substeps": spec.substeps, "burn_in": spec.burn_in,
            "init_noise": spec.init_noise, "obs_noise": spec.obs_noise, "seed": spec.seed}
    return TimeSeriesData(x, lorenz96_truth(spec.n), meta)
