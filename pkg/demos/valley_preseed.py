"""What breaks when a single EMA carries a huge momentum? Pre-seed it and see.

We give both optimizers an initial "speed" by filling their first-moment
buffers with a nonzero vector before the first step (the second-moment
estimate stays zero). Adam with beta1=0.999 needs hundreds of steps to bend
that stale momentum, so it overshoots and never comes back within the
budget. The mixture's fast EMA (beta1=0.9) corrects the heading within a few
steps while its slow EMA keeps the useful long-range drift.

Run: python demos/valley_preseed.py
"""

import numpy as np

from emx import AdamW, AdEMAMix, preseed_momentum, sharp_valley

TARGET = np.array([1.0, 4.0])
START = np.array([0.3, 1.5])
BUDGET = 2000
LR = 0.01


def run(opt, preseed):
    preseed_momentum(opt, np.array(preseed))
    theta = START.copy()
    closest = np.inf
    for _ in range(BUDGET):
        _, grad = sharp_valley(theta)
        theta = opt.step(theta, grad, LR)
        closest = min(closest, float(np.linalg.norm(theta - TARGET)))
    return float(np.linalg.norm(theta - TARGET)), closest


print(f"Sharp valley, start {START.tolist()}, optimum {TARGET.tolist()}, "
      f"{BUDGET} steps at lr={LR}\n")
for preseed in ([-3.0, 0.0], [-0.8, -3.0]):
    adam_final, adam_closest = run(AdamW(2, beta1=0.999, beta2=0.999), preseed)
    mix_final, mix_closest = run(
        AdEMAMix(2, beta1=0.9, beta2=0.999, beta3=0.999, alpha=2.0), preseed
    )
    print(f"momentum preseed {preseed}:")
    print(f"  Adam beta1=0.999 : final |x-x*| = {adam_final:7.4f}   closest ever = {adam_closest:7.4f}")
    print(f"  two-EMA mixture  : final |x-x*| = {mix_final:7.4f}   closest ever = {mix_closest:7.4f}")
    verdict = "mixture recovers, Adam does not" if mix_final <= 0.1 < adam_closest else "unexpected"
    print(f"  -> {verdict}\n")
