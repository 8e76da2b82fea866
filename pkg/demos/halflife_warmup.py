"""Warming up a huge momentum decay without blowing up early training.

Jumping straight to beta3=0.9999 makes early updates explode (the slow EMA
is dominated by the first few gradients for thousands of steps). A linear
ramp on beta itself is useless: the same increment of beta means nothing at
0.9 and everything at 0.999. The right knob is the half-life: ramp
t_half(beta) linearly and map back. This script shows the two ramps side by
side and checks the linearity numerically.

Run: python demos/halflife_warmup.py
"""

from emx import HalfLifeLinearWarmup, t_half

HORIZON = 100_000
sched = HalfLifeLinearWarmup(final=0.9999, start=0.9, horizon=HORIZON)

print(f"beta: 0.9 -> 0.9999 over {HORIZON} steps "
      f"(half-life {t_half(0.9):.1f} -> {t_half(0.9999):.0f} steps)\n")
print(f"{'step':>8} {'linear beta':>12} {'half-life ramp':>15} {'its half-life':>14}")
for frac in (0.0001, 0.01, 0.1, 0.25, 0.5, 0.75, 1.0):
    t = max(1, int(frac * HORIZON))
    linear = 0.9 + (t / HORIZON) * (0.9999 - 0.9)
    beta = sched.at(t)
    print(f"{t:>8} {linear:>12.6f} {beta:>15.6f} {t_half(beta):>14.1f}")

print("\nA tiny decay increment is worth wildly different amounts of memory:")
for beta in (0.9, 0.999):
    gain = t_half(beta + 0.0001) - t_half(beta)
    print(f"  beta {beta} -> {beta + 0.0001}: half-life grows by {gain:.2f} steps")

worst = 0.0
h0, h1 = t_half(0.9), t_half(0.9999)
for k in range(1, 200):
    t = k * HORIZON // 200
    expected = (1 - t / HORIZON) * h0 + (t / HORIZON) * h1
    worst = max(worst, abs(t_half(sched.at(t)) - expected) / expected)
print(f"\nhalf-life linearity holds to relative {worst:.1e} across the ramp")
