"""Multi-pair objective, AdamW and the epoch loop.

A training example is a :class:`PairGroup`: one clean embedding and ``N``
noisy variants of the same utterance.  Each visit of a group draws one
timestep and one Gaussian noise vector which are shared by the clean member
and all noisy members, so ``x_t - y_t^k == sqrt(alpha_bar_t) * (x0 - y0^k)``.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError, NumericError
from .network import Gradients, ModelParams, fit_standardizer, forward_backward, init_params
from .schedule import NoiseSchedule, forward_diffuse

log = logging.getLogger(__name__)

LOSS_KINDS = ("mse", "l2")


@dataclass
class PairGroup:
    clean: np.ndarray
    noisy: np.ndarray  # (N, D)
    group_id: str = ""

    def __post_init__(self):
        self.clean = np.asarray(self.clean)
        self.noisy = np.atleast_2d(np.asarray(self.noisy))
        if self.clean.ndim != 1:
            raise DataError(f"group {self.group_id!r}: clean embedding must be 1-d")
        if self.noisy.shape[0] < 1 or self.noisy.shape[1] != self.clean.shape[0]:
            raise DataError(
                f"group {self.group_id!r}: noisy shape {self.noisy.shape} "
                f"incompatible with clean dim {self.clean.shape[0]}"
            )

    @property
    def dim(self) -> int:
        return self.clean.shape[0]

    @property
    def n_variants(self) -> int:
        return self.noisy.shape[0]


@dataclass
class TrainConfig:
    epochs: int = 60
    lr: float = 0.0005
    weight_decay: float = 0.01
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    groups_per_batch: int = 64
    N: int = 3
    T: int = 1000
    seed: int = 0
    loss_kind: str = "mse"
    lr_schedule: str = "constant"
    temb_dim: int | None = None
    n_blocks: int = 3
    standardize: bool = True
    max_seconds: float | None = None
    deterministic: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError("epochs", f"must be >= 1, got {self.epochs}")
        if not self.lr > 0:
            raise ConfigError("lr", f"must be > 0, got {self.lr}")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay", f"must be >= 0, got {self.weight_decay}")
        if not (0 < self.adam_beta1 < self.adam_beta2 < 1):
            raise ConfigError("adam_beta1", "need 0 < beta1 < beta2 < 1")
        if self.adam_eps <= 0:
            raise ConfigError("adam_eps", "must be > 0")
        if self.groups_per_batch < 1:
            raise ConfigError("groups_per_batch", f"must be >= 1, got {self.groups_per_batch}")
        if self.N < 1:
            raise ConfigError("N", f"must be >= 1, got {self.N}")
        if self.loss_kind not in LOSS_KINDS:
            raise ConfigError("loss_kind", f"must be one of {LOSS_KINDS}, got {self.loss_kind!r}")
        if self.lr_schedule not in ("constant", "linear"):
            raise ConfigError("lr_schedule", f"must be 'constant' or 'linear', got {self.lr_schedule!r}")


@dataclass
class OptimizerState:
    m1: dict = field(default_factory=dict)
    m2: dict = field(default_factory=dict)
    step: int = 0

    @classmethod
    def zeros(cls, m: ModelParams) -> "OptimizerState":
        return cls(
            {n: np.zeros_like(a) for n, a in m.named_parameters()},
            {n: np.zeros_like(a) for n, a in m.named_parameters()},
            0,
        )


def is_decayed(name: str) -> bool:
    """Weight decay applies to linear weight matrices only."""
    return name.endswith(".weight")


# --------------------------------------------------------------------------
# loss
# --------------------------------------------------------------------------

def diffuse_for_model(m: ModelParams, x0, eps, t, s: NoiseSchedule) -> np.ndarray:
    """Forward-diffuse in the model's standardized coordinates, return raw coordinates.

    ``mean + scale * forward_diffuse((x0 - mean) / scale, eps, t)``; equal to
    :func:`forward_diffuse` when the standardizer is off or the identity.
    The difference of two states sharing ``eps`` and ``t`` is still exactly
    ``sqrt(alpha_bar_t) * (x0 - y0)``.
    """
    return m.from_standard(forward_diffuse(m.to_standard(x0), eps, t, s))


def _distance_and_grad(pred, target, kind):
    """Per-row distance and its gradient w.r.t. ``pred``."""
    diff = pred - target
    D = diff.shape[-1]
    if kind == "mse":
        return (diff * diff).mean(axis=-1), 2.0 * diff / D
    norm = np.sqrt((diff * diff).sum(axis=-1))
    safe = np.where(norm > 0, norm, 1.0)
    return norm, np.where(norm[:, None] > 0, diff / safe[:, None], 0.0)


def batch_loss(m: ModelParams, clean, noisy, t, eps, s: NoiseSchedule, kind: str = "mse"):
    """Mean over groups of the multi-pair reconstruction loss.

    Args:
        clean: ``(G, D)`` clean embeddings.
        noisy: ``(G, N, D)`` noisy variants.
        t: ``(G,)`` timesteps, one per group.
        eps: ``(G, D)`` noise, one vector per group shared by all members.

    Returns:
        ``(loss, grads, per_group_loss)``.
    """
    clean = np.asarray(clean, dtype=m.dtype)
    noisy = np.asarray(noisy, dtype=m.dtype)
    G, N, D = noisy.shape
    if clean.shape != (G, D) or np.shape(eps) != (G, D):
        raise DataError(f"shape mismatch: clean {clean.shape}, noisy {noisy.shape}, eps {np.shape(eps)}")
    if D != m.dim:
        raise DataError(f"embedding dimension mismatch: model expects {m.dim}, got {D}")
    t = np.asarray(t)
    eps = np.asarray(eps, dtype=m.dtype)

    x_t = diffuse_for_model(m, clean, eps, t, s)
    y_t = diffuse_for_model(
        m, 
        noisy.reshape(G * N, D), np.repeat(eps, N, axis=0), np.repeat(t, N), s
    ).reshape(G, N, D)
    # rows: [x_t, y_t^0 .. y_t^{N-1}] per group
    inputs = np.concatenate([x_t[:, None, :], y_t], axis=1).reshape(G * (N + 1), D)
    targets = np.repeat(clean, N + 1, axis=0)
    ts = np.repeat(t, N + 1)

    per_group = {}

    def loss_grad(pred):
        d, g = _distance_and_grad(pred, targets, kind)
        per_group["v"] = d.reshape(G, N + 1).sum(axis=1)
        return per_group["v"].mean(), g / G

    _, loss, grads = forward_backward(m, inputs, ts, loss_grad)
    return float(loss), grads, per_group["v"]


def seed_loss(m: ModelParams, g: PairGroup, t: int, eps, s: NoiseSchedule, kind: str = "mse"):
    """Loss and gradients for a single group.

    ``loss = d(x0, f(x_t, t)) + sum_k d(x0, f(y_t^k, t))`` where ``d`` is the
    per-dimension mean squared error (``"mse"``) or the Euclidean norm (``"l2"``).
    """
    if np.shape(eps) != (g.dim,):
        raise DataError(f"eps shape {np.shape(eps)} does not match group dim {g.dim}")
    loss, grads, _ = batch_loss(
        m, g.clean[None], g.noisy[None], np.array([t]), np.asarray(eps)[None], s, kind
    )
    return loss, grads


# --------------------------------------------------------------------------
# optimizer
# --------------------------------------------------------------------------

def optimizer_step(m: ModelParams, st: OptimizerState, grads: Gradients, c: TrainConfig,
                   lr: float | None = None) -> None:
    """AdamW update of ``m`` and ``st`` in place.

    Decoupled decay ``lr * weight_decay * theta`` is applied to linear weight
    matrices only; norm gains/biases and bias vectors are exempt.
    """
    lr = c.lr if lr is None else lr
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in parameter tensor {name!r}")
    st.step += 1
    b1, b2 = c.adam_beta1, c.adam_beta2
    bc1 = 1.0 - b1 ** st.step
    bc2 = 1.0 - b2 ** st.step
    for name, p in m.named_parameters():
        g = grads[name]
        m1, m2 = st.m1[name], st.m2[name]
        m1 *= b1
        m1 += (1.0 - b1) * g
        m2 *= b2
        m2 += (1.0 - b2) * g * g
        update = lr * (m1 / bc1) / (np.sqrt(m2 / bc2) + c.adam_eps)
        if c.weight_decay and is_decayed(name):
            p -= lr * c.weight_decay * p
        p -= update.astype(p.dtype, copy=False)


# --------------------------------------------------------------------------
# loop
# --------------------------------------------------------------------------

def _stack(corpus: Sequence[PairGroup]):
    if not corpus:
        raise DataError("empty corpus")
    D, N = corpus[0].dim, corpus[0].n_variants
    for g in corpus:
        if g.dim != D:
            raise DataError(f"group {g.group_id!r} has dim {g.dim}, expected {D}")
        if g.n_variants != N:
            raise DataError(f"group {g.group_id!r} has {g.n_variants} noisy variants, expected {N}")
    clean = np.stack([g.clean for g in corpus])
    noisy = np.stack([g.noisy for g in corpus])
    return clean, noisy


def train(corpus: Sequence[PairGroup], c: TrainConfig, s: NoiseSchedule,
          model: ModelParams | None = None):
    """Fit a model on ``corpus``.

    Returns ``(model, history)`` where ``history[i]`` is the mean per-group
    loss over epoch ``i``.  Everything is driven by one generator seeded from
    ``c.seed``; with ``c.max_seconds`` unset the result is bit-reproducible.
    """
    clean, noisy = _stack(corpus)
    n, D = clean.shape
    if s.T != c.T:
        log.debug("schedule T=%d overrides config T=%d", s.T, c.T)
    rng = np.random.default_rng(c.seed)
    if model is None:
        model = init_params(D, c.temb_dim or D, c.n_blocks, seed=c.seed)
        if c.standardize:
            fit_standardizer(model, clean)
        else:
            model.standardize = False
    elif model.dim != D:
        raise DataError(f"embedding dimension mismatch: model expects {model.dim}, got {D}")
    st = OptimizerState.zeros(model)
    steps_per_epoch = -(-n // c.groups_per_batch)
    total_steps = steps_per_epoch * c.epochs
    history: list[float] = []
    start = time.perf_counter()

    for epoch in range(c.epochs):
        order = rng.permutation(n)
        epoch_sum = 0.0
        for b in range(steps_per_epoch):
            idx = order[b * c.groups_per_batch:(b + 1) * c.groups_per_batch]
            t = rng.integers(1, s.T + 1, size=idx.size)
            eps = rng.standard_normal((idx.size, D))
            loss, grads, per_group = batch_loss(model, clean[idx], noisy[idx], t, eps, s, c.loss_kind)
            if not np.isfinite(loss):
                raise NumericError(f"non-finite loss at epoch {epoch + 1}, batch {b}")
            lr = c.lr
            if c.lr_schedule == "linear":
                lr = c.lr * (1.0 - st.step / total_steps)
            optimizer_step(model, st, grads, c, lr=lr)
            epoch_sum += float(per_group.sum(dtype=np.float64))
        history.append(epoch_sum / n)
        log.info("epoch %d/%d loss %.6g", epoch + 1, c.epochs, history[-1])
        if c.max_seconds is not None and time.perf_counter() - start > c.max_seconds:
            log.warning("stopping after epoch %d: max_seconds=%s exceeded", epoch + 1, c.max_seconds)
            break
    return model, history
