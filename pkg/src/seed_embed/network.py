"""Residual fully-connected sample-prediction network with analytic gradients.

Every residual block is three ``LayerNorm -> SiLU -> Linear`` units::

    h1  = unit_in(x)                  # D  -> 2D
    h2  = h1 + unit_temb(temb)        # E  -> 2D, additive conditioning
    out = x + unit_out(h2)            # 2D -> D

The network wraps the blocks with a per-dimension standardizer and a
residual output head ``z + unit_final(z)``, so a model whose output layers
are zero is exactly the identity map.

Linear weights are stored ``(fan_in, fan_out)`` and applied as ``x @ W + b``.
All forward/backward code is batched over rows; a single ``(D,)`` vector is
handled as a batch of one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import ConfigError, DataError

LN_EPS = 1e-5

Gradients = dict  # parameter name -> ndarray, ordered like ModelParams.named_parameters()


@dataclass
class LayerNorm:
    gain: np.ndarray
    bias: np.ndarray


@dataclass
class Linear:
    weight: np.ndarray
    bias: np.ndarray


@dataclass
class ResidualBlockParams:
    in_norm: LayerNorm
    in_linear: Linear
    temb_norm: LayerNorm
    temb_linear: Linear
    out_norm: LayerNorm
    out_linear: Linear

    def named_parameters(self) -> Iterator[tuple[str, np.ndarray]]:
        for name in ("in", "temb", "out"):
            norm, lin = getattr(self, f"{name}_norm"), getattr(self, f"{name}_linear")
            yield f"{name}_norm.gain", norm.gain
            yield f"{name}_norm.bias", norm.bias
            yield f"{name}_linear.weight", lin.weight
            yield f"{name}_linear.bias", lin.bias


@dataclass
class ModelParams:
    """All trainable tensors plus the (untrained) input standardizer."""

    blocks: list[ResidualBlockParams]
    temb_in: Linear
    temb_out: Linear
    final_norm: LayerNorm
    final_linear: Linear
    mean: np.ndarray
    scale: np.ndarray
    standardize: bool = True

    def __post_init__(self):
        if not self.blocks:
            raise ConfigError("n_blocks", "must be >= 1")
        if np.any(self.scale <= 0):
            raise ConfigError("scale", "standardizer scale must be > 0")

    @property
    def dim(self) -> int:
        return self.final_linear.weight.shape[1]

    @property
    def temb_dim(self) -> int:
        return self.temb_in.weight.shape[0]

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    @property
    def dtype(self) -> np.dtype:
        return self.final_linear.weight.dtype

    def named_parameters(self) -> list[tuple[str, np.ndarray]]:
        """Trainable tensors in checkpoint traversal order."""
        out = []
        for i, block in enumerate(self.blocks):
            out.extend((f"blocks.{i}.{n}", a) for n, a in block.named_parameters())
        out += [
            ("temb_in.weight", self.temb_in.weight),
            ("temb_in.bias", self.temb_in.bias),
            ("temb_out.weight", self.temb_out.weight),
            ("temb_out.bias", self.temb_out.bias),
            ("final_norm.gain", self.final_norm.gain),
            ("final_norm.bias", self.final_norm.bias),
            ("final_linear.weight", self.final_linear.weight),
            ("final_linear.bias", self.final_linear.bias),
        ]
        return out

    def astype(self, dtype) -> "ModelParams":
        """Deep copy with every array cast to ``dtype``."""
        cast = lambda a: np.array(a, dtype=dtype)  # noqa: E731
        ln = lambda p: LayerNorm(cast(p.gain), cast(p.bias))  # noqa: E731
        lin = lambda p: Linear(cast(p.weight), cast(p.bias))  # noqa: E731
        blocks = [
            ResidualBlockParams(
                ln(b.in_norm), lin(b.in_linear),
                ln(b.temb_norm), lin(b.temb_linear),
                ln(b.out_norm), lin(b.out_linear),
            )
            for b in self.blocks
        ]
        return ModelParams(
            blocks, lin(self.temb_in), lin(self.temb_out),
            ln(self.final_norm), lin(self.final_linear),
            cast(self.mean), cast(self.scale), self.standardize,
        )

    def copy(self) -> "ModelParams":
        return self.astype(self.dtype)

    def to_standard(self, e):
        return (e - self.mean) / self.scale if self.standardize else e

    def from_standard(self, z):
        return z * self.scale + self.mean if self.standardize else z


def zeros_like_grads(m: ModelParams) -> Gradients:
    return {name: np.zeros_like(a) for name, a in m.named_parameters()}


# --------------------------------------------------------------------------
# construction
# --------------------------------------------------------------------------

def init_params(D: int, E: int | None = None, n_blocks: int = 3, seed: int = 0,
                dtype=np.float32) -> ModelParams:
    """Fresh model: uniform(+-1/sqrt(fan_in)) weights, unit gains, zero biases.

    The last linear layer of every block and the final head are zero, so the
    returned model is the identity on embeddings.  Hidden width is ``2 * D``.
    """
    if E is None:
        E = D
    if D < 1:
        raise ConfigError("dim", f"must be >= 1, got {D}")
    if E < 2 or E % 2:
        raise ConfigError("temb_dim", f"must be a positive even integer, got {E}")
    if n_blocks < 1:
        raise ConfigError("n_blocks", f"must be >= 1, got {n_blocks}")
    rng = np.random.default_rng(seed)
    H = 2 * D

    def linear(fan_in, fan_out, zero=False):
        if zero:
            w = np.zeros((fan_in, fan_out))
        else:
            bound = 1.0 / np.sqrt(fan_in)
            w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        return Linear(w.astype(dtype), np.zeros(fan_out, dtype=dtype))

    def norm(n):
        return LayerNorm(np.ones(n, dtype=dtype), np.zeros(n, dtype=dtype))

    blocks = []
    for _ in range(n_blocks):
        blocks.append(ResidualBlockParams(
            norm(D), linear(D, H),
            norm(E), linear(E, H),
            norm(H), linear(H, D, zero=True),
        ))
    temb_in, temb_out = linear(E, E), linear(E, E)
    return ModelParams(
        blocks, temb_in, temb_out, norm(D), linear(D, D, zero=True),
        np.zeros(D, dtype=dtype), np.ones(D, dtype=dtype),
    )


def fit_standardizer(m: ModelParams, clean: np.ndarray, min_scale: float = 1e-6) -> None:
    """Set the standardizer from clean embeddings ``(n, D)`` in place."""
    clean = np.asarray(clean, dtype=np.float64)
    m.mean[...] = clean.mean(axis=0)
    m.scale[...] = np.maximum(clean.std(axis=0), min_scale)
    m.standardize = True


# --------------------------------------------------------------------------
# primitives
# --------------------------------------------------------------------------

def sinusoidal_timestep_embedding(t, E: int) -> np.ndarray:
    """Interleaved sin/cos encoding: ``[sin(t w_0), cos(t w_0), sin(t w_1), ...]``.

    ``w_i = 10000 ** (-2i/E)``.  Returns ``(E,)`` for scalar ``t`` and
    ``(B, E)`` for an array of ``B`` timesteps.
    """
    if E < 2 or E % 2:
        raise ConfigError("temb_dim", f"must be a positive even integer, got {E}")
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0):
        raise DataError("timestep must be >= 0")
    freqs = 10000.0 ** (-np.arange(0, E, 2, dtype=np.float64) / E)
    angles = t[..., None] * freqs
    out = np.empty(angles.shape[:-1] + (E,))
    out[..., 0::2] = np.sin(angles)
    out[..., 1::2] = np.cos(angles)
    return out


def _sigmoid(u):
    return 0.5 * (1.0 + np.tanh(0.5 * u))


def _ln_forward(x, p: LayerNorm):
    xc = x - x.mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + LN_EPS)
    xh = xc * inv
    return xh * p.gain + p.bias, (xh, inv)


def _ln_backward(dy, cache, p: LayerNorm, grads, prefix):
    xh, inv = cache
    grads[prefix + ".gain"] += (dy * xh).sum(axis=0)
    grads[prefix + ".bias"] += dy.sum(axis=0)
    dxh = dy * p.gain
    return inv * (dxh - dxh.mean(axis=-1, keepdims=True)
                  - xh * (dxh * xh).mean(axis=-1, keepdims=True))


def _unit_forward(x, norm: LayerNorm, lin: Linear):
    """LayerNorm -> SiLU -> Linear."""
    u, ln_cache = _ln_forward(x, norm)
    s = _sigmoid(u)
    a = u * s
    return a @ lin.weight + lin.bias, (ln_cache, u, s, a)


def _unit_backward(dy, cache, norm: LayerNorm, lin: Linear, grads, norm_name, lin_name):
    ln_cache, u, s, a = cache
    grads[lin_name + ".weight"] += a.T @ dy
    grads[lin_name + ".bias"] += dy.sum(axis=0)
    da = dy @ lin.weight.T
    du = da * (s * (1.0 + u * (1.0 - s)))
    return _ln_backward(du, ln_cache, norm, grads, norm_name)


def _as_batch(m: ModelParams, e, t):
    e = np.asarray(e)
    single = e.ndim == 1
    e2 = e[None, :] if single else e
    if e2.ndim != 2 or e2.shape[1] != m.dim:
        raise DataError(f"embedding dimension mismatch: model expects {m.dim}, got shape {e.shape}")
    t = np.asarray(t)
    if t.ndim == 0:
        t = np.full(e2.shape[0], t)
    if t.shape != (e2.shape[0],):
        raise DataError(f"{t.size} timesteps for {e2.shape[0]} embeddings")
    return e2.astype(m.dtype, copy=False), t, single


def block_forward(p: ResidualBlockParams, x, temb):
    """One residual block on a batch ``x (B, D)`` with ``temb (B, E)``."""
    return _block_forward(p, np.atleast_2d(x), np.atleast_2d(temb))[0].reshape(np.shape(x))


def _block_forward(p: ResidualBlockParams, x, temb):
    if x.shape[-1] != p.in_norm.gain.shape[0] or temb.shape[-1] != p.temb_norm.gain.shape[0]:
        raise DataError("block input shape mismatch")
    h1, c_in = _unit_forward(x, p.in_norm, p.in_linear)
    c, c_temb = _unit_forward(temb, p.temb_norm, p.temb_linear)
    o, c_out = _unit_forward(h1 + c, p.out_norm, p.out_linear)
    return x + o, (c_in, c_temb, c_out)


def _block_backward(p: ResidualBlockParams, dout, cache, grads, prefix):
    c_in, c_temb, c_out = cache
    dh2 = _unit_backward(dout, c_out, p.out_norm, p.out_linear, grads,
                         prefix + "out_norm", prefix + "out_linear")
    dx = dout + _unit_backward(dh2, c_in, p.in_norm, p.in_linear, grads,
                               prefix + "in_norm", prefix + "in_linear")
    dtemb = _unit_backward(dh2, c_temb, p.temb_norm, p.temb_linear, grads,
                           prefix + "temb_norm", prefix + "temb_linear")
    return dx, dtemb


# --------------------------------------------------------------------------
# model
# --------------------------------------------------------------------------

def _forward(m: ModelParams, e, t):
    z = m.to_standard(e)
    s_emb = sinusoidal_timestep_embedding(t, m.temb_dim).astype(m.dtype)
    pre = s_emb @ m.temb_in.weight + m.temb_in.bias
    sig = _sigmoid(pre)
    act = pre * sig
    temb = act @ m.temb_out.weight + m.temb_out.bias
    block_caches = []
    for block in m.blocks:
        z, c = _block_forward(block, z, temb)
        block_caches.append(c)
    head, c_final = _unit_forward(z, m.final_norm, m.final_linear)
    z = z + head
    return m.from_standard(z), (s_emb, pre, sig, act, block_caches, c_final)


def model_forward(m: ModelParams, e, t) -> np.ndarray:
    """Predict the clean embedding from a (possibly corrupted) one at timestep ``t``.

    ``e`` is ``(D,)`` or ``(B, D)``; ``t`` a scalar or ``(B,)``.  The output
    has the shape of ``e`` and the dtype of the model.
    """
    e2, t, single = _as_batch(m, e, t)
    out, _ = _forward(m, e2, t)
    return out[0] if single else out


def model_backward(m: ModelParams, e, t, out_grad) -> Gradients:
    """Gradients of ``sum(out_grad * model_forward(m, e, t))`` w.r.t. every trainable tensor.

    For batches the per-row contributions are summed.
    """
    e2, t, single = _as_batch(m, e, t)
    g = np.asarray(out_grad, dtype=m.dtype)
    g = g[None, :] if single else g
    if g.shape != e2.shape:
        raise DataError(f"out_grad shape {np.shape(out_grad)} does not match input {np.shape(e)}")
    _, cache = _forward(m, e2, t)
    return _backward(m, cache, g)


def forward_backward(m: ModelParams, e, t, loss_grad_fn):
    """Forward pass, then backward with ``out_grad = loss_grad_fn(output)``.

    ``loss_grad_fn`` returns ``(loss, out_grad)``; this returns
    ``(output, loss, grads)`` while running the forward pass only once.
    """
    e2, t, _ = _as_batch(m, e, t)
    out, cache = _forward(m, e2, t)
    loss, g = loss_grad_fn(out)
    return out, loss, _backward(m, cache, np.asarray(g, dtype=m.dtype))


def _backward(m: ModelParams, cache, g) -> Gradients:
    s_emb, pre, sig, act, block_caches, c_final = cache
    grads = zeros_like_grads(m)
    dz = g * m.scale if m.standardize else g
    dz = dz + _unit_backward(dz, c_final, m.final_norm, m.final_linear, grads,
                             "final_norm", "final_linear")
    dtemb = np.zeros((g.shape[0], m.temb_dim), dtype=m.dtype)
    for i in reversed(range(m.n_blocks)):
        dz, dt = _block_backward(m.blocks[i], dz, block_caches[i], grads, f"blocks.{i}.")
        dtemb += dt
    grads["temb_out.weight"] += act.T @ dtemb
    grads["temb_out.bias"] += dtemb.sum(axis=0)
    dpre = (dtemb @ m.temb_out.weight.T) * (sig * (1.0 + pre * (1.0 - sig)))
    grads["temb_in.weight"] += s_emb.T @ dpre
    grads["temb_in.bias"] += dpre.sum(axis=0)
    return grads
