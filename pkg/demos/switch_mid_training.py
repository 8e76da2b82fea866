"""Turning the slow EMA on (or off) halfway through a training run.

The mixture state can be created from a live AdamW state: the fast EMA and
second moment carry over bit-for-bit, the slow EMA starts at zero, and the
warmup clocks restart at the switch. On a noisy regression task the earlier
the switch, the better the final loss; switching the slow EMA *off* lands
between the two pure runs.

Run: python demos/switch_mid_training.py   (takes ~10s)
"""

from emx import parse_config, run_experiment

STEPS = 1500
SEEDS = (1, 2, 3)
BASE = """
testbed.kind = mlp
testbed.input_dim = 16
testbed.hidden = 64, 64
testbed.batch_size = 32
optimizer.kind = {optimizer}
{opt_extra}lr.kind = constant
lr.value = 0.003
run.steps = {steps}
run.seed = {seed}
run.cadence = 10
{extra}"""

MIX = ("optimizer.beta3 = 0.999\noptimizer.alpha = 5.0\n"
       f"optimizer.t_alpha = {STEPS}\noptimizer.t_beta3 = {STEPS}\n")


def final_loss(optimizer, seed, opt_extra="", extra=""):
    text = BASE.format(optimizer=optimizer, steps=STEPS, seed=seed,
                       opt_extra=opt_extra, extra=extra)
    return run_experiment(parse_config(text)).final_loss


print(f"Tiny-MLP regression, {STEPS} steps, eval loss on a fixed 256-sample batch\n")
print(f"{'seed':>4} {'AdamW':>9} {'switch@1100':>12} {'switch@700':>12} "
      f"{'switch@300':>12} {'mixture':>9} {'mix->AdamW@750':>15}")
for seed in SEEDS:
    adamw = final_loss("adamw", seed)
    mixture = final_loss("ademamix", seed, opt_extra=MIX)
    sw = {
        at: final_loss(
            "adamw", seed,
            extra=f"switch.to = ademamix\nswitch.at = {at}\n"
                  "switch.alpha = 2.0\nswitch.beta3 = 0.999\n",
        )
        for at in (1100, 700, 300)
    }
    back = final_loss("ademamix", seed, opt_extra=MIX,
                      extra="switch.to = adamw\nswitch.at = 750\n")
    print(f"{seed:>4} {adamw:>9.5f} {sw[1100]:>12.5f} {sw[700]:>12.5f} "
          f"{sw[300]:>12.5f} {mixture:>9.5f} {back:>15.5f}")

print("\nReading order: each row should decrease left to right up to 'mixture',")
print("and the switch-back column should sit between 'AdamW' and 'mixture'.")
