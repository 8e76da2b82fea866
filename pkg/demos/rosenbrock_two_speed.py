"""Why mix a fast and a slow gradient EMA? A banana-valley walkthrough.

Adam with a small momentum decay (beta1=0.9) follows the curved valley of
the Rosenbrock function cautiously. Raising beta1 makes it move faster but
oscillate across the valley walls. The two-EMA mixture gets the speedup of a
huge momentum (beta3=0.999, half-life ~700 steps) while the fast EMA keeps
correcting the heading, so it travels fast *without* the oscillations.

Run: python demos/rosenbrock_two_speed.py
"""

import numpy as np

from emx import AdamW, AdEMAMix, rosenbrock

STEPS = 5000
LRS = (3e-4, 1e-3, 3e-3, 1e-2, 3e-2)
OPTIMUM = np.array([1.0, 1.0])


def run(opt, lr):
    theta = np.array([-3.0, 5.0])
    x2 = [theta[1]]
    for _ in range(STEPS):
        _, grad = rosenbrock(theta)
        theta = opt.step(theta, grad, lr)
        x2.append(theta[1])
    return float(np.linalg.norm(theta - OPTIMUM)), x2


def oscillations(x2):
    signs = np.sign(np.diff(x2))
    signs = signs[signs != 0]
    return int(np.sum(signs[1:] != signs[:-1]))


print(f"Rosenbrock from [-3, 5], {STEPS} steps, best over lrs {LRS}\n")

print("Adam (beta2=0.999), sweeping beta1:")
adam_best = np.inf
for beta1 in (0.9, 0.99, 0.999, 0.9999):
    results = [(run(AdamW(2, beta1=beta1, beta2=0.999), lr), lr) for lr in LRS]
    (dist, x2), lr = min(results, key=lambda r: r[0][0])
    adam_best = min(adam_best, dist)
    print(f"  beta1={beta1:<7} best lr={lr:<7} |x-x*|={dist:9.4f}  direction flips={oscillations(x2)}")

print("\nTwo-EMA mixture (beta1=0.9, beta2=0.999, alpha=9), sweeping beta3:")
mix_best = np.inf
for beta3 in (0.999, 0.9999):
    results = [(run(AdEMAMix(2, beta1=0.9, beta2=0.999, beta3=beta3, alpha=9.0), lr), lr)
               for lr in LRS]
    (dist, x2), lr = min(results, key=lambda r: r[0][0])
    mix_best = min(mix_best, dist)
    print(f"  beta3={beta3:<7} best lr={lr:<7} |x-x*|={dist:9.4f}  direction flips={oscillations(x2)}")

print(f"\nbest Adam: {adam_best:.4f}   best mixture: {mix_best:.4f}   "
      f"({adam_best / mix_best:.0f}x closer)")
