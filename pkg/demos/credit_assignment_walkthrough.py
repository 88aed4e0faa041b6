"""Walk through cooperative credit assignment for one rollout group.

The group has three correct answers: two that restate the same reasoning
(duplicate embeddings) and one that solves the problem a different way
(orthogonal embedding). Uniform per-sample rewards treat all three the
same; log-det team value and Shapley credits do not.
"""

import numpy as np

from gcpo import (
    CreditConfig,
    Rollout,
    RolloutGroup,
    assign_group_rewards,
    build_gated_features,
    build_kernel,
    exact_shapley,
    loo_credits,
    mc_shapley,
    team_value,
)

group = RolloutGroup(
    group_id="demo",
    rollouts=[
        Rollout(id="algebraic-a", embedding=np.array([1.0, 0.0]), reward=1.0),
        Rollout(id="algebraic-b", embedding=np.array([1.0, 0.0]), reward=1.0),
        Rollout(id="geometric", embedding=np.array([0.0, 1.0]), reward=1.0),
        Rollout(id="wrong", embedding=np.array([0.7, 0.7]), reward=0.0),
    ],
)

# ------------------------------------------------------------------
# The reward-gated kernel: L_ij = r_i r_j <z_i, z_j> on unit vectors.
# The wrong answer's row and column are gated to zero.
# ------------------------------------------------------------------
features = build_gated_features(group)
kernel = build_kernel(features)
print("kernel L =")
print(kernel.matrix)

# ------------------------------------------------------------------
# Team value v(S) = log det(I + L_S) rewards coverage, not count:
# adding a duplicate grows v far less than adding the orthogonal solve.
# ------------------------------------------------------------------
print("\nv({algebraic-a})            =", team_value(kernel, [0]))
print("v({algebraic-a,b})          =", team_value(kernel, [0, 1]))
print("v({algebraic-a, geometric}) =", team_value(kernel, [0, 2]))
print("v(all correct)              =", team_value(kernel, [0, 1, 2]))

# ------------------------------------------------------------------
# Shapley credits split v fairly. The duplicates share one reasoning
# mode's worth of value; the geometric solve keeps its own. Exact
# enumeration and the Monte-Carlo estimator agree, and both give the
# wrong answer exactly zero (null player).
# ------------------------------------------------------------------
exact = exact_shapley(features)
mc = mc_shapley(features, CreditConfig(permutations=2000, seed=0))
loo = loo_credits(features)
print("\n{:<14} {:>10} {:>10} {:>10}".format("rollout", "exact", "mc", "loo"))
for i, rollout in enumerate(group.rollouts):
    print(
        "{:<14} {:>10.6f} {:>10.6f} {:>10.6f}".format(
            rollout.id, exact.credits[i], mc.credits[i], loo.credits[i]
        )
    )
print("sum of exact credits =", exact.credits.sum(), "= v(P) =", exact.team_value_total)

# ------------------------------------------------------------------
# Redistribution keeps the group's reward budget but moves it toward
# the novel solve; the advantage correction it induces sums to zero.
# ------------------------------------------------------------------
assignment = assign_group_rewards(group)
print("\nraw rewards      =", assignment.rewards)
print("redistributed    =", assignment.redistributed)
print("budget conserved :", assignment.redistributed.sum(), "=", assignment.rewards.sum())
print("delta advantage  =", assignment.corrections)
print("sum(delta)       =", assignment.corrections.sum())
