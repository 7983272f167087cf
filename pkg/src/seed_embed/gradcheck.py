"""Central finite-difference check of the analytic network gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import ModelParams, init_params, model_backward, model_forward

FD_STEP = 1e-4
REL_FLOOR = 1e-6


@dataclass
class GradCheckResult:
    max_rel_error: float
    worst_param: str
    n_checked: int


def random_model(D: int, E: int, n_blocks: int, seed: int) -> ModelParams:
    """float64 model with every tensor (including the zero-init ones) randomized."""
    m = init_params(D, E, n_blocks, seed=seed, dtype=np.float64)
    rng = np.random.default_rng(seed + 10_000)
    for name, a in m.named_parameters():
        a[...] = rng.normal(0.0, 0.5, size=a.shape) + (1.0 if name.endswith(".gain") else 0.0)
    m.mean[...] = rng.normal(0.0, 0.3, size=D)
    m.scale[...] = rng.uniform(0.5, 2.0, size=D)
    return m


def relative_error(analytic, numeric, floor: float = REL_FLOOR) -> float:
    """Tensor-wise error ``max|a - n| / max(max|a|, max|n|, floor)``.

    Entrywise ratios are dominated by O(h^2) truncation on entries whose
    gradient is many orders below the rest of the tensor.
    """
    analytic, numeric = np.asarray(analytic), np.asarray(numeric)
    scale = max(np.abs(analytic).max(), np.abs(numeric).max(), floor)
    return float(np.abs(analytic - numeric).max() / scale)


def check_model(m: ModelParams, e, t, out_grad, h: float = FD_STEP) -> GradCheckResult:
    """Compare ``model_backward`` with central differences of ``sum(out_grad * f)``."""
    analytic = model_backward(m, e, t, out_grad)

    def objective():
        return float(np.sum(model_forward(m, e, t) * out_grad))

    worst, worst_name, n = 0.0, "", 0
    for name, a in m.named_parameters():
        numeric = np.empty_like(a)
        flat, num_flat = a.reshape(-1), numeric.reshape(-1)
        for i in range(flat.size):
            v = flat[i]
            flat[i] = v + h
            up = objective()
            flat[i] = v - h
            down = objective()
            flat[i] = v
            num_flat[i] = (up - down) / (2 * h)
        err = relative_error(analytic[name], numeric)
        n += a.size
        if err > worst:
            worst, worst_name = err, name
    return GradCheckResult(worst, worst_name, n)


def run_gradcheck(D: int = 6, E: int = 4, n_blocks=(1, 2, 3), seeds=(0, 1, 2),
                  timesteps=(1, 50, 999)) -> GradCheckResult:
    """Worst entrywise relative error over every (n_blocks, seed, timestep) combination."""
    worst = GradCheckResult(0.0, "", 0)
    total = 0
    for nb in n_blocks:
        for seed in seeds:
            m = random_model(D, E, nb, seed)
            rng = np.random.default_rng(seed)
            for t in timesteps:
                e = rng.normal(size=D)
                g = rng.normal(size=D)
                r = check_model(m, e, t, g)
                total += r.n_checked
                if r.max_rel_error >= worst.max_rel_error:
                    worst = GradCheckResult(r.max_rel_error, f"n_blocks={nb} seed={seed} t={t} {r.worst_param}", 0)
    return GradCheckResult(worst.max_rel_error, worst.worst_param, total)
