"""Embedding enhancement with a trained sample-prediction model.

The raw input embedding is treated directly as the corrupted state at
``t_infer``; no forward noise is added unless ``noise_first`` is set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .network import ModelParams, model_forward
from .schedule import NoiseSchedule, ddim_sample, forward_diffuse, uniform_timesteps


@dataclass
class InferenceConfig:
    t_infer: int = 50
    steps: int = 1
    ensemble: bool = False
    noise_first: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.t_infer < 1:
            raise ConfigError("t_infer", f"must be >= 1, got {self.t_infer}")
        if self.steps < 1:
            raise ConfigError("steps", f"must be >= 1, got {self.steps}")
        if self.steps > self.t_infer:
            raise ConfigError("steps", f"cannot exceed t_infer={self.t_infer}")


def enhance(m: ModelParams, e, s: NoiseSchedule, cfg: InferenceConfig = InferenceConfig()) -> np.ndarray:
    """Map ``e`` (``(D,)`` or ``(B, D)``) toward its clean counterpart.

    ``steps == 1`` returns ``f(e, t_infer)``; larger values run deterministic
    DDIM over ``uniform_timesteps(t_infer, steps)`` and a final step to 0.
    Honors ``cfg.ensemble`` by delegating to :func:`enhance_ensemble`.
    """
    if cfg.ensemble:
        return enhance_ensemble(m, e, s, cfg)
    return _enhance(m, e, s, cfg)


def _enhance(m, e, s, cfg):
    e = np.asarray(e)
    if e.shape[-1] != m.dim or e.ndim not in (1, 2):
        raise DataError(f"embedding dimension mismatch: model expects {m.dim}, got shape {e.shape}")
    if cfg.t_infer > s.T:
        raise ConfigError("t_infer", f"{cfg.t_infer} exceeds schedule length T={s.T}")
    x = e.astype(m.dtype)
    if cfg.noise_first:
        rng = np.random.default_rng(cfg.seed)
        eps = rng.standard_normal(x.shape).astype(m.dtype)
        x = m.from_standard(forward_diffuse(m.to_standard(x), eps, cfg.t_infer, s))
    timesteps = uniform_timesteps(cfg.t_infer, cfg.steps)
    return ddim_sample(lambda z, t: model_forward(m, z, t), x, timesteps, s)


def enhance_ensemble(m: ModelParams, e, s: NoiseSchedule,
                     cfg: InferenceConfig = InferenceConfig()) -> np.ndarray:
    """Feature ensemble: raw embedding plus its enhanced version."""
    e = np.asarray(e)
    return e.astype(m.dtype) + _enhance(m, e, s, cfg)
