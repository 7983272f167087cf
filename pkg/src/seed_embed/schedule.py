"""Noise schedule and closed-form diffusion arithmetic.

Timesteps are 1-indexed, ``t in {1..T}``, with the convention
``alpha_bar(0) == 1`` so that a DDIM step to ``t_prev = 0`` lands exactly on
the predicted clean sample.  All schedule tables are float64; the embedding
arrays keep whatever dtype they come in with.

Every function accepts either a single ``(D,)`` vector or a ``(B, D)`` batch.
For batches ``t`` may be a scalar or a ``(B,)`` integer array.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, DataError, NumericError

DEFAULT_T = 1000
DEFAULT_BETA_START = 0.00085
DEFAULT_BETA_END = 0.012


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-timestep ``beta``, ``alpha`` and ``alpha_bar`` tables.

    Index ``i`` of each array holds the value for timestep ``t = i + 1``.
    """

    T: int
    beta_start: float
    beta_end: float
    beta: np.ndarray = field(repr=False)
    alpha: np.ndarray = field(repr=False)
    alpha_bar: np.ndarray = field(repr=False)

    def __post_init__(self):
        for arr in (self.beta, self.alpha, self.alpha_bar):
            arr.setflags(write=False)

    def alpha_bar_at(self, t) -> np.ndarray:
        """``alpha_bar`` for timestep(s) ``t`` in ``{0..T}``; ``t = 0`` gives 1."""
        t = np.asarray(t)
        _check_timesteps(t, self.T, allow_zero=True)
        padded = np.concatenate([[1.0], self.alpha_bar])
        return padded[t]


def make_scaled_linear_schedule(
    T: int = DEFAULT_T,
    beta_start: float = DEFAULT_BETA_START,
    beta_end: float = DEFAULT_BETA_END,
) -> NoiseSchedule:
    """Build a "scaled linear" schedule: linear in ``sqrt(beta)``, then squared.

    ``beta_t = (sqrt(beta_start) + (t-1)/(T-1) * (sqrt(beta_end) - sqrt(beta_start)))**2``
    with ``beta_1 = beta_start`` when ``T == 1``.
    """
    if isinstance(T, bool) or int(T) != T or T < 1:
        raise ConfigError("T", f"must be an integer >= 1, got {T!r}")
    T = int(T)
    if not (0.0 < beta_start < 1.0):
        raise ConfigError("beta_start", f"must lie in (0, 1), got {beta_start!r}")
    if not (0.0 < beta_end < 1.0):
        raise ConfigError("beta_end", f"must lie in (0, 1), got {beta_end!r}")
    if beta_start > beta_end:
        raise ConfigError("beta_end", f"must be >= beta_start ({beta_start}), got {beta_end}")

    if T == 1 or beta_start == beta_end:
        beta = np.full(T, beta_start, dtype=np.float64)
    else:
        frac = np.arange(T, dtype=np.float64) / (T - 1)
        lo, hi = np.sqrt(beta_start), np.sqrt(beta_end)
        beta = (lo + frac * (hi - lo)) ** 2
        # pin endpoints against rounding in the square
        beta[0], beta[-1] = beta_start, beta_end
    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    return NoiseSchedule(T, float(beta_start), float(beta_end), beta, alpha, alpha_bar)


def _check_timesteps(t: np.ndarray, T: int, allow_zero: bool = False) -> None:
    if not np.issubdtype(t.dtype, np.integer):
        raise DataError(f"timesteps must be integers, got dtype {t.dtype}")
    lo = 0 if allow_zero else 1
    if t.size and (t.min() < lo or t.max() > T):
        raise DataError(f"timestep out of range [{lo}, {T}]: {t.min()}..{t.max()}")


def _coef(s: NoiseSchedule, t, like: np.ndarray, allow_zero: bool = False):
    """Return (sqrt(alpha_bar), sqrt(1-alpha_bar)) broadcastable against ``like``."""
    t = np.asarray(t)
    if not np.issubdtype(t.dtype, np.integer):
        raise DataError(f"timesteps must be integers, got dtype {t.dtype}")
    _check_timesteps(t, s.T, allow_zero=allow_zero)
    ab = s.alpha_bar_at(t)
    if t.ndim == 1:
        if like.ndim != 2 or like.shape[0] != t.shape[0]:
            raise DataError(f"{t.shape[0]} timesteps for array of shape {like.shape}")
        ab = ab[:, None]
    elif t.ndim > 1:
        raise DataError("timesteps must be a scalar or a 1-d array")
    dtype = like.dtype if np.issubdtype(like.dtype, np.floating) else np.float64
    return np.sqrt(ab).astype(dtype), np.sqrt(1.0 - ab).astype(dtype)


def _check_pair(a: np.ndarray, b: np.ndarray, names: str) -> None:
    if a.shape != b.shape:
        raise DataError(f"dimension mismatch between {names}: {a.shape} vs {b.shape}")


def forward_diffuse(x0, eps, t, s: NoiseSchedule) -> np.ndarray:
    """Corrupt ``x0`` to timestep ``t``: ``sqrt(ab)*x0 + sqrt(1-ab)*eps``."""
    x0, eps = np.asarray(x0), np.asarray(eps)
    _check_pair(x0, eps, "x0 and eps")
    a, b = _coef(s, t, x0)
    return a * x0 + b * eps


def x0_from_eps(x_t, eps_hat, t, s: NoiseSchedule) -> np.ndarray:
    """Clean-sample estimate implied by a noise estimate."""
    x_t, eps_hat = np.asarray(x_t), np.asarray(eps_hat)
    _check_pair(x_t, eps_hat, "x_t and eps_hat")
    a, b = _coef(s, t, x_t)
    return (x_t - b * eps_hat) / a


def eps_from_x0(x_t, x0_hat, t, s: NoiseSchedule) -> np.ndarray:
    """Noise estimate implied by a clean-sample estimate."""
    x_t, x0_hat = np.asarray(x_t), np.asarray(x0_hat)
    _check_pair(x_t, x0_hat, "x_t and x0_hat")
    a, b = _coef(s, t, x_t)
    if np.any(b == 0):
        raise NumericError("eps_from_x0 undefined where alpha_bar == 1")
    return (x_t - a * x0_hat) / b


def ddim_step(x_t, x0_hat, t: int, t_prev: int, s: NoiseSchedule) -> np.ndarray:
    """Deterministic (eta = 0) DDIM update from ``t`` to ``t_prev``.

    A step to ``t_prev = 0`` returns ``x0_hat`` unchanged.
    """
    if not (0 <= t_prev < t <= s.T):
        raise DataError(f"DDIM step requires 0 <= t_prev < t <= T, got t={t}, t_prev={t_prev}")
    x_t, x0_hat = np.asarray(x_t), np.asarray(x0_hat)
    _check_pair(x_t, x0_hat, "x_t and x0_hat")
    if t_prev == 0:
        return x0_hat.copy()
    eps_hat = eps_from_x0(x_t, x0_hat, t, s)
    a, b = _coef(s, t_prev, x_t)
    return a * x0_hat + b * eps_hat


def uniform_timesteps(t_start: int, steps: int) -> list[int]:
    """Descending sub-schedule ``t_start, ..., t_start/steps`` of ``steps`` points.

    For ``t_start=1000, steps=4`` this is ``[1000, 750, 500, 250]``; the sampler
    then finishes with a step to 0.
    """
    if steps < 1:
        raise ConfigError("steps", f"must be >= 1, got {steps}")
    if steps > t_start:
        raise ConfigError("steps", f"cannot exceed the start timestep {t_start}")
    return [int(round(t_start * (steps - i) / steps)) for i in range(steps)]


def ddim_sample(
    predict_x0: Callable[[np.ndarray, int], np.ndarray],
    x_start,
    timesteps: Sequence[int],
    s: NoiseSchedule,
) -> np.ndarray:
    """Run DDIM over descending ``timesteps`` and a final step to 0."""
    x = np.asarray(x_start)
    ts = list(timesteps) + [0]
    for t, t_prev in zip(ts[:-1], ts[1:]):
        x = ddim_step(x, predict_x0(x, t), t, t_prev, s)
    return x


def format_schedule(s: NoiseSchedule) -> str:
    """Tab-separated ``t beta alpha alpha_bar`` table, 12 significant digits."""
    lines = ["t\tbeta\talpha\talpha_bar"]
    for i in range(s.T):
        lines.append(f"{i + 1}\t{s.beta[i]:.12g}\t{s.alpha[i]:.12g}\t{s.alpha_bar[i]:.12g}")
    return "\n".join(lines) + "\n"
