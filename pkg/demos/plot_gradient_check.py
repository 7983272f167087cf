"""
Checking the hand-written backward pass
=======================================

The network has no autodiff; every gradient is derived by hand.  Central
differences on a small float64 model confirm them.
"""

import numpy as np

from seed_embed.gradcheck import check_model, random_model
from seed_embed.network import init_params, model_forward

# A fresh model is the identity map, because every last layer starts at zero.
m = init_params(16, seed=0)
e = np.random.default_rng(0).normal(size=16).astype(np.float32)
print("fresh model, max |f(e) - e| =", np.abs(model_forward(m, e, 50) - e).max())

# Randomize every tensor, including the zero-initialized ones, and compare.
m = random_model(D=6, E=4, n_blocks=2, seed=1)
rng = np.random.default_rng(1)
for t in (1, 50, 999):
    r = check_model(m, rng.normal(size=6), t, rng.normal(size=6))
    print(f"t={t:3d}  worst relative error {r.max_rel_error:.2e} in {r.worst_param}")
