"""Checkpoints are bit-exact: split a run anywhere and nothing changes.

Every run is a pure function of (config, seed): the data stream is keyed by
step through a counter-based generator, schedules are pure functions of the
step index, and the checkpoint carries every state slot as raw float64.
This script runs 120 steps straight through, then re-runs them as 3 resumed
segments and compares the final parameters byte for byte.

Run: python demos/deterministic_resume.py
"""

from emx import Experiment, load_state, parse_config

CFG = parse_config("""
testbed.kind = mlp
testbed.input_dim = 8
testbed.hidden = 32
testbed.batch_size = 16
optimizer.kind = ademamix
optimizer.beta3 = 0.999
optimizer.alpha = 2.0
lr.kind = constant
lr.value = 0.003
run.steps = 120
run.seed = 42
run.cadence = 1
run.clip = 1.0
""")

straight = Experiment(CFG)
straight.run()
print(f"straight run : {straight.opt.t} steps, final eval loss "
      f"{straight.record.final_loss:.6f}")

segmented = Experiment(CFG)
blob = None
for stop in (40, 80, 120):
    if blob is not None:
        segmented = Experiment(CFG, resume_from=load_state(blob))
    segmented.run(until=stop)
    blob = segmented.checkpoint()
    print(f"segment to {stop:>3}: checkpoint of {len(blob)} bytes")

identical = segmented.theta.tobytes() == straight.theta.tobytes()
print(f"\nfinal parameters byte-identical across the split: {identical}")
assert identical
