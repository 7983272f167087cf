"""
EER and minDCF on a toy trial list
==================================
"""

import numpy as np

from seed_embed.scoring import DcfParams, ScoreSet, compute_eer, compute_min_dcf

# Three target and three nontarget trials; one nontarget outranks a target.
s = ScoreSet([0.9, 0.7, 0.5, 0.8, 0.4, 0.2], [1, 1, 1, 0, 0, 0])
eer, th = compute_eer(s)
print(f"EER = {eer:.4f} at threshold {th}")

# minDCF is normalized by the cost of the better trivial system.
for p in (0.01, 0.05, 0.5):
    dcf, th = compute_min_dcf(s, DcfParams(p_target=p))
    print(f"P_target={p:<5} minDCF = {dcf:.4f} at threshold {th}")

# Only the ranking of scores matters.
warped = ScoreSet(np.exp(3 * s.scores), s.labels)
print("EER after a monotone warp:", compute_eer(warped)[0])
