"""Proximal maps for the three lag-grouped lasso penalties.

All operators take a ``LagStack`` and a shrinkage amount ``t`` (step size
times penalty weight).  They return new arrays; inputs are not
modified.
"""
from __future__ import annotations

from typing import Optional

import numpy as np

from .loss import PenaltyKind
from .model import LagStack


def _shrink_factor(norms: np.ndarray, t: float) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        f = 1.0 - t / norms
    f[~(norms > 0)] = 0.0
    return np.maximum(f, 0.0)


def _sq_block_norms(w5: np.ndarray) -> np.ndarray:
    return np.einsum("lirjc,lirjc->lij", w5, w5)


def prox_ulg(lags: LagStack, t: float, reference: Optional[LagStack] = None) -> LagStack:
    """Scale every (i, j) group, all lags together, by ``(1 - t/||group||)_+``.

    ``reference`` selects whose group norms go in the denominator; by default
    the input's own (the standard proximal map).
    """
    if t == 0:
        return lags.copy()
    ref = lags if reference is None else reference
    norms = np.sqrt(_sq_block_norms(ref.blocks()).sum(axis=0))
    f = _shrink_factor(norms, t)
    out = lags.blocks() * f[None, :, None, :, None]
    return LagStack(out.reshape(lags.weights.shape), lags.n, lags.N)


def prox_ilg(lags: LagStack, t: float, reference: Optional[LagStack] = None) -> LagStack:
    """Shrink each lag block independently."""
    if t == 0:
        return lags.copy()
    ref = lags if reference is None else reference
    norms = np.sqrt(_sq_block_norms(ref.blocks()))
    f = _shrink_factor(norms, t)
    out = lags.blocks() * f[:, :, None, :, None]
    return LagStack(out.reshape(lags.weights.shape), lags.n, lags.N)


def prox_hlg(lags: LagStack, t: float) -> LagStack:
    """``L`` sequential rounds; round ``l`` shrinks the suffix of lags ``l..L``
    using norms of the values left by round ``l-1``."""
    if t == 0:
        return lags.copy()
    w = lags.blocks().copy()
    for l in range(lags.L):
        suffix = w[l:]
        norms = np.sqrt(_sq_block_norms(suffix).sum(axis=0))
        f = _shrink_factor(norms, t)
        w[l:] = suffix * f[None, :, None, :, None]
    return LagStack(w.reshape(lags.weights.shape), lags.n, lags.N)


def apply_prox(lags: LagStack, kind, t: float, previous: Optional[LagStack] = None) -> LagStack:
    """Dispatch on penalty kind.

    ``previous`` (the pre-gradient iterate) switches ULG/ILG to use its group
    norms in the shrink denominator instead of the intermediate's.
    """
    kind = PenaltyKind.parse(kind)
    if kind is PenaltyKind.ULG:
        return prox_ulg(lags, t, previous)
    if kind is PenaltyKind.ILG:
        return prox_ilg(lags, t, previous)
    return prox_hlg(lags, t)
