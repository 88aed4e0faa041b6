"""Compare GRPO and GCPO training dynamics on the synthetic task.

The default task has two orthogonal correct reasoning modes plus a
highly similar third one and several incorrect modes. Per-sample reward
cannot tell the two orthogonal modes apart, so GRPO tends to collapse
onto whichever one it samples more early; GCPO's redistributed rewards
keep paying for coverage and hold both modes alive.

Writes one CSV trace per algorithm next to this script.
"""

import pathlib

import numpy as np

from gcpo import TrainConfig, default_task, run_training

HERE = pathlib.Path(__file__).parent
STEPS = 400
SEEDS = range(5)

task = default_task()
finals = {"grpo": [], "gcpo": []}
for algorithm in ("grpo", "gcpo"):
    for seed in SEEDS:
        log = run_training(task, TrainConfig(algorithm=algorithm, steps=STEPS, seed=seed))
        finals[algorithm].append(log.team_value[-1])
        if seed == 0:
            with open(HERE / f"dynamics_{algorithm}.csv", "w") as stream:
                log.write_csv(stream)

print(f"final team value after {STEPS} steps ({len(list(SEEDS))} seeds)\n")
print("{:>6} {:>12} {:>12}".format("seed", "grpo", "gcpo"))
for seed in SEEDS:
    print("{:>6} {:>12.4f} {:>12.4f}".format(seed, finals["grpo"][seed], finals["gcpo"][seed]))
print(
    "\nmean  {:>12.4f} {:>12.4f}".format(
        np.mean(finals["grpo"]), np.mean(finals["gcpo"])
    )
)
wins = sum(g > b for g, b in zip(finals["gcpo"], finals["grpo"]))
print(f"gcpo ends with higher team value on {wins} of {len(finals['gcpo'])} seeds")
print(f"\ntraces written to {HERE}/dynamics_grpo.csv and dynamics_gcpo.csv")
