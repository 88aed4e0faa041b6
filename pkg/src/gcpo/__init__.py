"""Cooperative credit assignment for verifier-scored rollout groups.

Builds a reward-gated similarity kernel over a group of rollout
embeddings, scores coalitions by a regularized log-determinant team
value, attributes it to rollouts via Shapley credits, and redistributes
the group's verifier reward in proportion, conserving the reward budget.
"""

from .credit import (
    CholeskyState,
    CreditConfig,
    CreditReport,
    cholesky_extend,
    compute_credits,
    exact_shapley,
    loo_credits,
    mc_shapley,
    required_permutations,
)
from .errors import (
    DegenerateCredits,
    DegenerateEmbedding,
    FactorizationFailure,
    GcpoError,
    GroupTooLarge,
    InvalidCounts,
    InvalidEigenvalue,
    InvalidParams,
    LengthMismatch,
    NoNgrams,
    SchurNotPositive,
    TooFewSequences,
)
from .kernel import (
    DEFAULT_EPSILON_NUM,
    KERNEL_KINDS,
    GatedFeatures,
    Kernel,
    Rollout,
    RolloutGroup,
    build_gated_features,
    build_kernel,
)
from .metrics import (
    SpectrumReport,
    distinct_n,
    eigenvalue_ratio,
    pass_at_k,
    self_bleu,
    self_rouge_l,
)
from .redistribution import (
    AdvantageConfig,
    RewardAssignment,
    advantage_correction,
    assign_group_rewards,
    normalized_advantages,
    redistribute,
)
from .sim import (
    DynamicsLog,
    PolicyState,
    ReasoningMode,
    SyntheticTask,
    TrainConfig,
    default_task,
    policy_update,
    run_training,
    sample_group,
)
from .team_value import (
    TeamValueConfig,
    marginal_contribution,
    spectral_team_value,
    team_value,
    team_value_dual,
    team_value_features,
)

__version__ = "0.1.0"
