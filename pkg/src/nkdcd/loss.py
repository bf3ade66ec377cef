"""Prediction losses and group-lasso penalties on lag stacks."""
from __future__ import annotations

import enum
from dataclasses import asdict, dataclass
from typing import Tuple

import numpy as np

from . import numgrad as ng
from .model import GraphOutputs, LagStack, Trajectories, _check_panel


class PenaltyKind(str, enum.Enum):
    ULG = "ulg"  # all lags of a (target, source) pair in one group
    HLG = "hlg"  # nested lag suffixes l..L
    ILG = "ilg"  # each lag block on its own

    @classmethod
    def parse(cls, value) -> "PenaltyKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown penalty kind {value!r}; expected ulg, hlg or ilg") from None


@dataclass
class LossBreakdown:
    recon_autoencoder: float
    lifted_var: float
    nar_base: float
    nar_autoencoded: float
    penalty: float = 0.0

    @property
    def j1(self) -> float:
        return self.recon_autoencoder + self.lifted_var + self.nar_base + self.nar_autoencoded

    @property
    def total(self) -> float:
        return self.j1 + self.penalty

    def average_j1(self, n: int, T: int) -> float:
        """J1 per series per time step (the stopping-rule quantity)."""
        return self.j1 / (n * T)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["total"] = self.total
        return d


def _sq(a: np.ndarray) -> float:
    return float(np.sum(a * a))


def j1(x, traj: Trajectories, L: int) -> LossBreakdown:
    """The four squared-error terms over their full time ranges."""
    x = np.asarray(x, dtype=np.float64)
    if traj.recon.shape != x.shape or traj.pred.shape != (x.shape[0] - L, x.shape[1]):
        raise ng.ShapeError(f"trajectories do not match panel shape {x.shape} with L={L}")
    return LossBreakdown(
        recon_autoencoder=_sq(x - traj.recon),
        lifted_var=_sq(traj.lifted[L:] - traj.lifted_pred),
        nar_base=_sq(x[L:] - traj.pred),
        nar_autoencoded=_sq(traj.recon[L:] - traj.pred),
    )


def evaluate(model, x, kind: PenaltyKind, lam: float) -> LossBreakdown:
    x = _check_panel(x, model.n, model.L)
    out = j1(x, model.forward_all(x), model.L)
    out.penalty = lam * penalty(model.lags, kind)
    return out


REDUCTIONS = ("sum", "mean", "element_mean")


def j1_graph(g: GraphOutputs, reduction: str = "sum") -> Tuple[ng.Node, Tuple[ng.Node, ...]]:
    """Tape version of ``j1`` restricted to the target steps of ``g``.

    ``reduction``: ``"sum"`` keeps raw squared-error sums, ``"mean"`` divides
    every term by the number of target steps, ``"element_mean"`` divides each
    term by its own entry count.
    """
    if reduction not in REDUCTIONS:
        raise ValueError(f"unknown reduction {reduction!r}; expected one of {REDUCTIONS}")
    x = ng.Node(g.x)
    diffs = (
        ng.subtract(x, g.recon),
        ng.subtract(g.lifted, g.lifted_pred),
        ng.subtract(x, g.pred),
        ng.subtract(g.recon, g.pred),
    )
    parts = []
    for d in diffs:
        term = ng.squared_norm(d)
        if reduction == "mean":
            term = ng.scale(term, 1.0 / d.shape[0])
        elif reduction == "element_mean":
            term = ng.scale(term, 1.0 / d.value.size)
        parts.append(term)
    return ng.sum_nodes(parts), tuple(parts)


def group_norms(lags: LagStack, kind: PenaltyKind) -> np.ndarray:
    """Norms of every penalty group.

    ULG: ``(n, n)``; HLG: ``(L, n, n)`` where entry ``l`` is the norm of lags
    ``l..L``; ILG: ``(L, n, n)`` per-block norms.
    """
    kind = PenaltyKind.parse(kind)
    sq = lags.block_norms() ** 2
    if kind is PenaltyKind.ULG:
        return np.sqrt(sq.sum(axis=0))
    if kind is PenaltyKind.HLG:
        return np.sqrt(np.cumsum(sq[::-1], axis=0)[::-1])
    return np.sqrt(sq)


def penalty(lags: LagStack, kind: PenaltyKind) -> float:
    return float(group_norms(lags, kind).sum())
