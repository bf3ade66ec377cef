"""Element-wise lifting, lifted lag regression and element-wise projection.

Every scalar series value is pushed through the same small MLP (the encoder)
to an ``N``-vector; the ``n`` per-series blocks are concatenated in series
order, so block ``i`` of a lifted vector always belongs to series ``i``.  A
stack of ``L`` lag matrices predicts the lifted state, and a second MLP (the
decoder) maps each ``N``-block back to a scalar.

Array conventions: a panel is ``(T, n)``; a lifted panel is ``(T, n*N)``;
lag matrices are stored as an ``(L, n*N, n*N)`` array with lag 1 first.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import numgrad as ng
from .numgrad import ShapeError

ACTIVATIONS = ("leaky_relu", "linear")


class InsufficientDataError(ValueError):
    """Fewer time steps than the model's lag order requires."""


@dataclass
class MLP:
    """Three affine layers; activation on the two hidden layers only."""

    weights: List[np.ndarray]
    biases: List[np.ndarray]
    activation: str = "leaky_relu"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}; expected one of {ACTIVATIONS}")
        if len(self.weights) != 3 or len(self.biases) != 3:
            raise ShapeError("MLP needs exactly three weight matrices and three bias rows")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if b.shape != (1, w.shape[1]):
                raise ShapeError(f"layer {k}: bias shape {b.shape} does not match weight {w.shape}")
            if k and self.weights[k - 1].shape[1] != w.shape[0]:
                raise ShapeError(f"layer {k}: weight {w.shape} does not chain onto "
                                 f"{self.weights[k - 1].shape}")

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[1]

    def parameters(self) -> List[np.ndarray]:
        return [*self.weights, *self.biases]

    def forward(self, x: np.ndarray) -> np.ndarray:
        h = np.asarray(x, dtype=np.float64)
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = ng.affine_forward(h, w, b)
            if k < 2 and self.activation == "leaky_relu":
                h = ng.leaky_relu(h)
        return h

    def forward_node(self, x: ng.Node, params: Sequence[ng.Node]) -> ng.Node:
        ws, bs = params[:3], params[3:]
        h = x
        for k in range(3):
            h = ng.affine(h, ws[k], bs[k])
            if k < 2 and self.activation == "leaky_relu":
                h = ng.leaky(h)
        return h

    def copy(self) -> "MLP":
        return type(self)([w.copy() for w in self.weights], [b.copy() for b in self.biases],
                          self.activation)


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=(fan_in, fan_out))


def _layer_widths(h: int) -> int:
    if h < 2 or h % 2:
        raise ValueError(f"width parameter h must be an even integer >= 2, got {h}")
    return h // 2


class EncoderNet(MLP):
    """Scalar -> N-vector lifting map (weights 1 x h/2, h/2 x h, h x N)."""

    @classmethod
    def init(cls, N: int, h: int, rng: np.random.Generator, activation="leaky_relu"):
        half = _layer_widths(h)
        dims = [(1, half), (half, h), (h, N)]
        return cls([_glorot(rng, a, b) for a, b in dims], [np.zeros((1, b)) for _, b in dims],
                   activation)

    def __post_init__(self):
        super().__post_init__()
        if self.in_dim != 1:
            raise ShapeError(f"encoder input width must be 1, got {self.in_dim}")


class DecoderNet(MLP):
    """N-vector -> scalar projection map (weights N x h, h x h/2, h/2 x 1)."""

    @classmethod
    def init(cls, N: int, h: int, rng: np.random.Generator, activation="leaky_relu"):
        half = _layer_widths(h)
        dims = [(N, h), (h, half), (half, 1)]
        return cls([_glorot(rng, a, b) for a, b in dims], [np.zeros((1, b)) for _, b in dims],
                   activation)

    def __post_init__(self):
        super().__post_init__()
        if self.out_dim != 1:
            raise ShapeError(f"decoder output width must be 1, got {self.out_dim}")


@dataclass
class LagStack:
    """``L`` lifted lag matrices, each ``(n*N, n*N)``.

    ``block(l, i, j)`` is the ``N x N`` coupling from source series ``j`` to
    target series ``i`` at lag ``l`` (all indices zero-based, lag 0 = lag 1).
    """

    weights: np.ndarray
    n: int
    N: int

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.n < 1 or self.N < 1:
            raise ValueError(f"need n >= 1 and N >= 1, got n={self.n}, N={self.N}")
        d = self.n * self.N
        if self.weights.ndim != 3 or self.weights.shape[1:] != (d, d) or self.weights.shape[0] < 1:
            raise ShapeError(f"lag weights must have shape (L, {d}, {d}), got {self.weights.shape}")

    @classmethod
    def zeros(cls, L: int, n: int, N: int) -> "LagStack":
        return cls(np.zeros((L, n * N, n * N)), n, N)

    @classmethod
    def init(cls, L: int, n: int, N: int, rng: np.random.Generator, scale: float = 0.01):
        return cls(rng.uniform(-scale, scale, size=(L, n * N, n * N)), n, N)

    @property
    def L(self) -> int:
        return self.weights.shape[0]

    def block(self, l: int, i: int, j: int) -> np.ndarray:
        N = self.N
        return self.weights[l, i * N:(i + 1) * N, j * N:(j + 1) * N]

    def blocks(self) -> np.ndarray:
        """View as ``(L, n, N, n, N)``: axes lag, target, row, source, col."""
        return self.weights.reshape(self.L, self.n, self.N, self.n, self.N)

    def block_norms(self) -> np.ndarray:
        """Frobenius norm of every block, shape ``(L, n, n)``."""
        b = self.blocks()
        return np.sqrt(np.einsum("lirjc,lirjc->lij", b, b))

    def wide(self) -> np.ndarray:
        """``[W_1 | W_2 | ... | W_L]`` with shape ``(n*N, L*n*N)``."""
        L, d, _ = self.weights.shape
        return self.weights.transpose(1, 0, 2).reshape(d, L * d)

    @staticmethod
    def unwide(wide: np.ndarray, L: int) -> np.ndarray:
        d = wide.shape[0]
        return wide.reshape(d, L, d).transpose(1, 0, 2)

    def copy(self) -> "LagStack":
        return LagStack(self.weights.copy(), self.n, self.N)


@dataclass
class Trajectories:
    """Outputs of a full forward pass over a panel.

    ``lifted`` and ``recon`` cover every time step; ``lifted_pred`` and
    ``pred`` cover steps ``L..T-1`` (zero-based).
    """

    lifted: np.ndarray
    lifted_pred: np.ndarray
    pred: np.ndarray
    recon: np.ndarray


@dataclass
class NkdcdModel:
    encoder: EncoderNet
    decoder: DecoderNet
    lags: LagStack
    frozen: Dict[str, bool] = field(default_factory=dict)

    def __post_init__(self):
        if self.encoder.out_dim != self.lags.N or self.decoder.in_dim != self.lags.N:
            raise ShapeError(f"lift dimension mismatch: encoder emits {self.encoder.out_dim}, "
                             f"decoder takes {self.decoder.in_dim}, lags use N={self.lags.N}")

    @classmethod
    def init(cls, n: int, N: int, L: int, h: int, seed: int = 0,
             activation: str = "leaky_relu", lag_scale: float = 0.01) -> "NkdcdModel":
        if L < 1:
            raise ValueError(f"lag order L must be >= 1, got {L}")
        rng = np.random.default_rng(seed)
        enc = EncoderNet.init(N, h, rng, activation)
        dec = DecoderNet.init(N, h, rng, activation)
        return cls(enc, dec, LagStack.init(L, n, N, rng, lag_scale))

    @property
    def n(self) -> int:
        return self.lags.n

    @property
    def N(self) -> int:
        return self.lags.N

    @property
    def L(self) -> int:
        return self.lags.L

    def copy(self) -> "NkdcdModel":
        return NkdcdModel(self.encoder.copy(), self.decoder.copy(), self.lags.copy(),
                          dict(self.frozen))

    # -- single-step operations -------------------------------------------

    def lift(self, x_t) -> np.ndarray:
        x_t = np.asarray(x_t, dtype=np.float64).ravel()
        if x_t.shape[0] != self.n:
            raise ShapeError(f"lift: expected {self.n} series values, got {x_t.shape[0]}")
        return self.encoder.forward(x_t.reshape(-1, 1)).ravel()

    def predict_lifted(self, history: Sequence) -> np.ndarray:
        """Sum of ``W_l @ history[l-1]``; ``history[0]`` is the most recent."""
        if len(history) < self.L:
            raise InsufficientDataError(f"need {self.L} lifted vectors of history, got {len(history)}")
        d = self.n * self.N
        out = np.zeros(d)
        for l in range(self.L):
            v = np.asarray(history[l], dtype=np.float64).ravel()
            if v.shape[0] != d:
                raise ShapeError(f"history[{l}] has length {v.shape[0]}, expected {d}")
            out += self.lags.weights[l] @ v
        return out

    def project(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64).ravel()
        if X.shape[0] != self.n * self.N:
            raise ShapeError(f"project: expected length {self.n * self.N}, got {X.shape[0]}")
        return self.decoder.forward(X.reshape(self.n, self.N)).ravel()

    # -- whole-panel operations -------------------------------------------

    def lift_panel(self, x: np.ndarray) -> np.ndarray:
        T, n = x.shape
        return self.encoder.forward(x.reshape(T * n, 1)).reshape(T, n * self.N)

    def project_panel(self, X: np.ndarray) -> np.ndarray:
        T = X.shape[0]
        return self.decoder.forward(X.reshape(T * self.n, self.N)).reshape(T, self.n)

    def forward_all(self, x) -> Trajectories:
        x = _check_panel(x, self.n, self.L)
        T = x.shape[0]
        X = self.lift_panel(x)
        Z = lag_design(X, np.arange(self.L, T), self.L)
        Xhat = Z @ self.lags.wide().T
        return Trajectories(lifted=X, lifted_pred=Xhat, pred=self.project_panel(Xhat),
                            recon=self.project_panel(X))


def _check_panel(x, n: int, L: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != n:
        raise ShapeError(f"panel must have shape (T, {n}), got {x.shape}")
    if x.shape[0] <= L:
        raise InsufficientDataError(f"need T > L, got T={x.shape[0]}, L={L}")
    if not np.all(np.isfinite(x)):
        raise ValueError("panel contains non-finite values")
    return x


def lag_design(X: np.ndarray, targets: np.ndarray, L: int) -> np.ndarray:
    """Rows ``[X[t-1], X[t-2], ..., X[t-L]]`` for each target index ``t``."""
    return np.concatenate([X[targets - l] for l in range(1, L + 1)], axis=1)


@dataclass
class GraphOutputs:
    x: np.ndarray          # observed values at the target steps, (B, n)
    lifted: ng.Node        # X^koop at target steps, (B, nN)
    lifted_pred: ng.Node   # lag-model prediction, (B, nN)
    recon: ng.Node         # decoder(encoder(x_t)), (B, n)
    pred: ng.Node          # decoder(prediction), (B, n)


@dataclass
class ParamNodes:
    encoder: List[ng.Node]
    decoder: List[ng.Node]
    lags: ng.Node          # wide layout, (nN, L*nN)

    def all(self) -> List[ng.Node]:
        return [*self.encoder, *self.decoder, self.lags]


def param_nodes(model: NkdcdModel) -> ParamNodes:
    def leaves(arrs, trainable=True):
        return [ng.Node(a, requires_grad=trainable) for a in arrs]

    return ParamNodes(
        encoder=leaves(model.encoder.parameters(), not model.frozen.get("encoder")),
        decoder=leaves(model.decoder.parameters(), not model.frozen.get("decoder")),
        lags=ng.Node(model.lags.wide(), requires_grad=not model.frozen.get("lags")),
    )


def graph_forward(model: NkdcdModel, params: ParamNodes, x: np.ndarray,
                  targets: np.ndarray) -> GraphOutputs:
    """Build the tape for the target steps ``targets`` (zero-based, all >= L).

    Only the rows of ``x`` the targets and their lag windows touch are lifted.
    """
    n, N, L = model.n, model.N, model.L
    rows = np.unique(np.concatenate([targets - l for l in range(L + 1)]))
    pos = np.searchsorted(rows, np.arange(x.shape[0]))  # valid only where x row is in ``rows``
    R = rows.shape[0]
    lifted_rows = ng.reshape(
        model.encoder.forward_node(ng.Node(x[rows].reshape(R * n, 1)), params.encoder),
        R, n * N)
    X_t = ng.take_rows(lifted_rows, pos[targets])
    Z = ng.concat_cols([ng.take_rows(lifted_rows, pos[targets - l]) for l in range(1, L + 1)])
    Xhat = ng.matmul(Z, params.lags, transpose_b=True)
    B = targets.shape[0]

    def project(node):
        flat = model.decoder.forward_node(ng.reshape(node, B * n, N), params.decoder)
        return ng.reshape(flat, B, n)

    return GraphOutputs(x=x[targets], lifted=X_t, lifted_pred=Xhat,
                        recon=project(X_t), pred=project(Xhat))
