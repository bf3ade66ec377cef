"""Linear VAR with lag-grouped lasso, fitted by proximal gradient descent.

The same prox operators as the NKDCD trainer are used, with 1x1 blocks.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Optional

import numpy as np

from .loss import PenaltyKind, penalty
from .model import InsufficientDataError, LagStack, lag_design
from .optim import DivergedError
from .prox import apply_prox


@dataclass
class BaselineConfig:
    lam: float = 1.0
    tau: Optional[float] = None   # None: 1 / Lipschitz constant of the data term
    L: int = 5
    penalty: PenaltyKind = PenaltyKind.ULG
    max_iter: int = 20000
    tol: float = 1e-9
    standardize: bool = True
    divergence_limit: float = 1e12

    def __post_init__(self):
        self.penalty = PenaltyKind.parse(self.penalty)
        if isinstance(self.tau, str):
            self.tau = float(self.tau)
        if isinstance(self.lam, str):
            self.lam = float(self.lam)
        if self.lam < 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if self.tau is not None and not 0 < self.tau <= 1:
            raise ValueError(f"tau must satisfy 0 < tau <= 1, got {self.tau}")
        if self.L < 1:
            raise ValueError(f"L must be >= 1, got {self.L}")

    @classmethod
    def from_dict(cls, d: dict) -> "BaselineConfig":
        known = {f.name for f in fields(cls)}
        aliases = {"lambda": "lam", "learning_rate": "tau", "lr": "tau"}
        clean = {}
        for k, v in d.items():
            k = aliases.get(k, k)
            if k not in known:
                raise ValueError(f"unknown baseline config key {k!r}")
            clean[k] = v
        return cls(**clean)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["penalty"] = self.penalty.value
        return d


@dataclass
class LinearVarModel:
    lags: LagStack            # (L, n, n) in the (possibly standardized) fitting scale
    config: BaselineConfig
    mean: np.ndarray
    scale: np.ndarray
    iterations: int = 0
    objective: float = float("nan")

    @property
    def n(self) -> int:
        return self.lags.n

    def lag_matrices(self) -> np.ndarray:
        """Coefficients in the original units of the data."""
        d = self.scale
        return self.lags.weights * d[None, :, None] / d[None, None, :]

    def predict(self, x: np.ndarray) -> np.ndarray:
        """One-step predictions for steps ``L..T-1`` in original units."""
        z = (np.asarray(x, dtype=np.float64) - self.mean) / self.scale
        L = self.lags.L
        Z = lag_design(z, np.arange(L, z.shape[0]), L)
        return (Z @ self.lags.wide().T) * self.scale + self.mean


def var_objective(x: np.ndarray, lags: LagStack) -> float:
    """Sum of squared one-step residuals over steps ``L..T-1``."""
    L = lags.L
    targets = np.arange(L, x.shape[0])
    r = x[targets] - lag_design(x, targets, L) @ lags.wide().T
    return float(np.sum(r * r))


def fit_var(data, cfg: BaselineConfig) -> LinearVarModel:
    x = np.asarray(getattr(data, "values", data), dtype=np.float64)
    T, n = x.shape
    L = cfg.L
    if T <= L:
        raise InsufficientDataError(f"need T > L, got T={T}, L={L}")
    if cfg.standardize:
        mean, scale = x.mean(axis=0), x.std(axis=0)
        scale[scale == 0] = 1.0
    else:
        mean, scale = np.zeros(n), np.ones(n)
    z = (x - mean) / scale

    targets = np.arange(L, T)
    Z = lag_design(z, targets, L)
    Y = z[targets]
    gram = Z.T @ Z
    cross = Y.T @ Z
    if cfg.tau is None:
        tau = 1.0 / (2.0 * np.linalg.eigvalsh(gram)[-1])
    else:
        tau = cfg.tau
    shrink = tau * cfg.lam

    wide = np.zeros((n, L * n))
    lags = LagStack(LagStack.unwide(wide, L), n, 1)
    prev_obj = np.inf
    it = 0
    for it in range(1, cfg.max_iter + 1):
        grad = 2.0 * (wide @ gram - cross)
        step = LagStack(LagStack.unwide(wide - tau * grad, L), n, 1)
        lags = apply_prox(step, cfg.penalty, shrink)
        wide = lags.wide()
        if it % 50 == 0 or it == cfg.max_iter:
            r = Y - Z @ wide.T
            obj = float(np.sum(r * r)) + cfg.lam * penalty(lags, cfg.penalty)
            if not np.isfinite(obj) or obj > cfg.divergence_limit:
                raise DivergedError(f"baseline diverged at iteration {it}", it)
            if abs(prev_obj - obj) <= cfg.tol * max(1.0, abs(obj)):
                break
            prev_obj = obj
    r = Y - Z @ wide.T
    obj = float(np.sum(r * r)) + cfg.lam * penalty(lags, cfg.penalty)
    return LinearVarModel(lags, cfg, mean, scale, it, obj)
