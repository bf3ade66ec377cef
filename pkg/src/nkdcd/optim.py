"""Training loop: gradient steps on the encoder/decoder, gradient-then-prox
steps on the lag stack."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from . import numgrad as ng
from .loss import REDUCTIONS as LOSS_REDUCTIONS, LossBreakdown, PenaltyKind, evaluate, j1_graph
from .model import (ACTIVATIONS, InsufficientDataError, LagStack, NkdcdModel,
                    _check_panel, graph_forward, param_nodes)
from .prox import apply_prox, prox_hlg, prox_ilg, prox_ulg  # noqa: F401  (re-exported)

OPTIMIZERS = ("sgd", "adam")
PROX_DENOMINATORS = ("intermediate", "previous")


class DivergedError(RuntimeError):
    def __init__(self, message: str, epoch: int, report: Optional["TrainReport"] = None):
        super().__init__(message)
        self.epoch = epoch
        self.report = report


def _coerce_numbers(cfg):
    # YAML reads "1e-4" as a string and JSON files carry "inf" as one
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if f.type in ("float", "int") and isinstance(v, str):
            try:
                setattr(cfg, f.name, float(v) if f.type == "float" else int(v))
            except ValueError:
                raise ValueError(f"{f.name} must be a number (got {v!r})") from None


@dataclass
class TrainConfig:
    lam: float = 0.05
    tau: float = 5e-4
    L: int = 5
    N: int = 15
    h: int = 16
    batch: int = 500
    penalty: PenaltyKind = PenaltyKind.ILG
    optimizer: str = "sgd"
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    activation: str = "leaky_relu"
    max_epochs: int = 2000
    stop_threshold: float = 0.9
    patience: int = 50
    min_rel_decrease: float = 1e-4
    seed: int = 0
    use_bias: bool = True
    lag_init_scale: float = 0.01
    loss_reduction: str = "mean"
    prox_denominator: str = "intermediate"
    divergence_limit: float = 1e12
    epsilon: float = 0.0

    def __post_init__(self):
        self.penalty = PenaltyKind.parse(self.penalty)
        _coerce_numbers(self)
        self.validate()

    def validate(self):
        problems = []
        if not self.lam > 0:
            problems.append(f"lam must be > 0 (got {self.lam})")
        if not 0 < self.tau <= 1:
            problems.append(f"tau must satisfy 0 < tau <= 1 (got {self.tau})")
        for name in ("L", "N", "batch", "max_epochs", "patience"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                problems.append(f"{name} must be a positive integer (got {v})")
        if self.h < 2 or self.h % 2:
            problems.append(f"h must be an even integer >= 2 (got {self.h})")
        if self.optimizer not in OPTIMIZERS:
            problems.append(f"optimizer must be one of {OPTIMIZERS} (got {self.optimizer!r})")
        if self.activation not in ACTIVATIONS:
            problems.append(f"activation must be one of {ACTIVATIONS} (got {self.activation!r})")
        if self.prox_denominator not in PROX_DENOMINATORS:
            problems.append(f"prox_denominator must be one of {PROX_DENOMINATORS}")
        if self.loss_reduction not in LOSS_REDUCTIONS:
            problems.append(f"loss_reduction must be one of {LOSS_REDUCTIONS}")
        if self.epsilon < 0:
            problems.append(f"epsilon must be >= 0 (got {self.epsilon})")
        if problems:
            raise ValueError("invalid training config: " + "; ".join(problems))

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        aliases = {"lambda": "lam", "learning_rate": "tau", "lr": "tau"}
        clean = {}
        for k, v in d.items():
            k = aliases.get(k, k)
            if k not in known:
                raise ValueError(f"unknown config key {k!r}")
            clean[k] = v
        return cls(**clean)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["penalty"] = self.penalty.value
        return d


@dataclass
class TrainReport:
    epochs: int
    history: List[LossBreakdown]
    stop_reason: str
    n: int = 0
    T: int = 0

    def average_j1(self) -> List[float]:
        return [b.average_j1(self.n, self.T) for b in self.history]

    def summary(self) -> dict:
        last = self.history[-1] if self.history else None
        return {
            "epochs": self.epochs,
            "stop_reason": self.stop_reason,
            "final_loss": last.to_dict() if last else None,
            "final_average_j1": last.average_j1(self.n, self.T) if last else None,
        }


# ---------------------------------------------------------------------------
# update rules


def _check_finite(arrays: Sequence[np.ndarray], what: str, epoch: int = -1):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise DivergedError(f"non-finite {what}", epoch)


def sgd_step_encoder_decoder(model: NkdcdModel, grads: Dict[str, List[np.ndarray]],
                             tau: float) -> NkdcdModel:
    """Plain gradient step on encoder and decoder; lags are left untouched.

    ``grads`` maps ``"encoder"``/``"decoder"`` to per-parameter gradients in
    ``MLP.parameters()`` order (weights then biases).
    """
    out = model.copy()
    for name in ("encoder", "decoder"):
        g = grads.get(name)
        if g is None:
            continue
        _check_finite(g, f"{name} gradient")
        net = getattr(out, name)
        params = net.parameters()
        for p, gp in zip(params, g):
            p -= tau * gp
    return out


class Adam:
    """Adam direction per named parameter array (state kept across calls)."""

    def __init__(self, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m: Dict[str, np.ndarray] = {}
        self.v: Dict[str, np.ndarray] = {}
        self.t = 0

    def tick(self):
        self.t += 1

    def direction(self, key: str, g: np.ndarray) -> np.ndarray:
        m = self.m.get(key)
        if m is None:
            m = self.m[key] = np.zeros_like(g)
            self.v[key] = np.zeros_like(g)
        v = self.v[key]
        m *= self.beta1
        m += (1 - self.beta1) * g
        v *= self.beta2
        v += (1 - self.beta2) * g * g
        mhat = m / (1 - self.beta1 ** self.t)
        vhat = v / (1 - self.beta2 ** self.t)
        return mhat / (np.sqrt(vhat) + self.eps)


# ---------------------------------------------------------------------------
# training


def build_model(n: int, cfg: TrainConfig, seed: Optional[int] = None) -> NkdcdModel:
    model = NkdcdModel.init(n, cfg.N, cfg.L, cfg.h, seed=cfg.seed if seed is None else seed,
                            activation=cfg.activation, lag_scale=cfg.lag_init_scale)
    return model


def train(data, cfg: TrainConfig, model: Optional[NkdcdModel] = None,
          on_epoch: Optional[Callable[[int, LossBreakdown], None]] = None):
    """Fit an NKDCD model to a ``(T, n)`` panel (or ``TimeSeriesData``).

    Returns ``(model, report)``.  Each epoch visits every valid target step
    once in shuffled mini-batches of ``cfg.batch``.
    """
    x = getattr(data, "values", data)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ng.ShapeError(f"panel must be 2-D (T, n), got shape {x.shape}")
    T, n = x.shape
    if T <= cfg.L:
        raise InsufficientDataError(f"need T > L, got T={T}, L={cfg.L}")
    _check_panel(x, n, cfg.L)

    seeds = np.random.SeedSequence(cfg.seed).spawn(2)
    if model is None:
        model = build_model(n, cfg, seed=int(seeds[0].generate_state(1)[0]))
    else:
        model = model.copy()
    if not cfg.use_bias:
        for net in (model.encoder, model.decoder):
            for b in net.biases:
                b[:] = 0.0
    rng = np.random.default_rng(seeds[1])
    adam = Adam(cfg.beta1, cfg.beta2, cfg.adam_eps) if cfg.optimizer == "adam" else None
    shrink = cfg.tau * cfg.lam
    valid = np.arange(cfg.L, T)

    history: List[LossBreakdown] = []
    best = np.inf
    stale = 0
    reason = "max-epochs"
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(valid)
        for start in range(0, order.shape[0], cfg.batch):
            targets = np.sort(order[start:start + cfg.batch])
            _step(model, x, targets, cfg, adam, shrink, epoch)

        bd = evaluate(model, x, cfg.penalty, cfg.lam)
        history.append(bd)
        if on_epoch is not None:
            on_epoch(epoch, bd)
        if not np.isfinite(bd.total) or bd.total > cfg.divergence_limit:
            report = TrainReport(epoch, history, "diverged", n, T)
            raise DivergedError(f"loss diverged at epoch {epoch} (total={bd.total:.3e})",
                                epoch, report)

        avg = bd.average_j1(n, T)
        if avg < best * (1.0 - cfg.min_rel_decrease):
            best = avg
            stale = 0
        else:
            stale += 1
        if avg < cfg.stop_threshold and stale >= cfg.patience:
            reason = "converged"
            break

    return model, TrainReport(len(history), history, reason, n, T)


def _step(model: NkdcdModel, x: np.ndarray, targets: np.ndarray, cfg: TrainConfig,
          adam: Optional[Adam], shrink: float, epoch: int):
    """One mini-batch update, applied to ``model`` in place."""
    params = param_nodes(model)
    g = graph_forward(model, params, x, targets)
    total, _ = j1_graph(g, cfg.loss_reduction)
    grads = ng.backward(total, params.all())
    if not np.isfinite(total.value[0, 0]):
        raise DivergedError(f"non-finite loss at epoch {epoch}", epoch)

    enc_g = [grads[p] for p in params.encoder]
    dec_g = [grads[p] for p in params.decoder]
    lag_g = LagStack.unwide(grads[params.lags], model.L)
    _check_finite(enc_g + dec_g + [lag_g], "gradient", epoch)
    if not cfg.use_bias:
        for gs in (enc_g, dec_g):
            for gb in gs[3:]:
                gb[:] = 0.0

    if adam is not None:
        adam.tick()
        enc_g = [adam.direction(f"enc{k}", gk) for k, gk in enumerate(enc_g)]
        dec_g = [adam.direction(f"dec{k}", gk) for k, gk in enumerate(dec_g)]
        lag_g = adam.direction("lags", lag_g)

    frozen = model.frozen
    for name, gs in (("encoder", enc_g), ("decoder", dec_g)):
        if frozen.get(name):
            continue
        for p, gp in zip(getattr(model, name).parameters(), gs):
            p -= cfg.tau * gp
    if frozen.get("lags"):
        return
    previous = model.lags if cfg.prox_denominator == "previous" else None
    intermediate = LagStack(model.lags.weights - cfg.tau * lag_g, model.n, model.N)
    model.lags = apply_prox(intermediate, cfg.penalty, shrink, previous)

