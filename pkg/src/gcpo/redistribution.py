"""Credit-proportional reward redistribution and advantage construction.

The group's total verifier reward is reallocated to positive-reward
rollouts in proportion to their cooperative credits, conserving the batch
reward budget exactly. Advantages are group-normalized rewards; the
correction delta_A is the difference between the redistributed-reward and
raw-reward advantages and always sums to zero.
"""

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .credit import CreditConfig, CreditReport, compute_credits
from .errors import InvalidParams, LengthMismatch
from .kernel import DEFAULT_EPSILON_NUM, RolloutGroup, build_gated_features, build_kernel
from .team_value import TeamValueConfig


@dataclass(frozen=True)
class AdvantageConfig:
    epsilon_num: float = DEFAULT_EPSILON_NUM

    def __post_init__(self):
        if self.epsilon_num <= 0:
            raise InvalidParams("epsilon_num must be > 0")


@dataclass(frozen=True)
class RewardAssignment:
    """Everything the trainer needs for one group, raw and redistributed."""

    rewards: np.ndarray
    redistributed: np.ndarray
    batch_total: float
    credits: np.ndarray
    advantages_gcpo: np.ndarray
    advantages_grpo: np.ndarray
    corrections: np.ndarray
    report: CreditReport = field(repr=False, default=None)


def redistribute(
    rewards: np.ndarray,
    credits: np.ndarray,
    epsilon_num: float = DEFAULT_EPSILON_NUM,
) -> np.ndarray:
    """Reallocate the total reward in proportion to credits.

    r_tilde_i = R_batch * credit_i / sum(credits) for positive-reward
    rollouts, zero otherwise. Sums use math.fsum so the conservation
    identity sum(r_tilde) = sum(r) survives floating point. If the total
    credit degenerates to ~zero despite a nonempty player set (possible
    only through pathological numerics), the budget is split uniformly.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    credits = np.asarray(credits, dtype=np.float64)
    if rewards.shape != credits.shape:
        raise LengthMismatch(f"rewards {rewards.shape} vs credits {credits.shape}")
    if np.any(credits < 0) or np.any(credits[rewards <= 0] != 0):
        raise InvalidParams("credits must be >= 0 and zero wherever the reward is zero")
    positive = rewards > 0
    out = np.zeros_like(rewards)
    if not positive.any():
        return out
    batch_total = math.fsum(rewards)
    total_credit = math.fsum(credits)
    if total_credit <= epsilon_num:
        warnings.warn(
            "total credit is numerically zero; splitting the reward budget uniformly",
            RuntimeWarning,
        )
        out[positive] = batch_total / np.count_nonzero(positive)
        return out
    out[positive] = (batch_total * credits[positive]) / total_credit
    return out


def normalized_advantages(values: np.ndarray, cfg: Optional[AdvantageConfig] = None) -> np.ndarray:
    """Group-normalized values (v - mean) / (population std + epsilon_num)."""
    cfg = cfg or AdvantageConfig()
    values = np.asarray(values, dtype=np.float64)
    if values.size < 1:
        raise InvalidParams("need at least one value")
    centered = values - values.mean()
    # second centering pass removes the rounding residual of the mean, so
    # the advantages sum to zero even when divided by a tiny deviation
    centered -= centered.mean()
    return centered / (values.std() + cfg.epsilon_num)


def advantage_correction(a_gcpo: np.ndarray, a_grpo: np.ndarray) -> np.ndarray:
    """Elementwise advantage correction; sums to zero by construction."""
    a_gcpo = np.asarray(a_gcpo, dtype=np.float64)
    a_grpo = np.asarray(a_grpo, dtype=np.float64)
    if a_gcpo.shape != a_grpo.shape:
        raise LengthMismatch(f"{a_gcpo.shape} vs {a_grpo.shape}")
    return a_gcpo - a_grpo


def assign_group_rewards(
    group: RolloutGroup,
    credit_cfg: Optional[CreditConfig] = None,
    team_cfg: Optional[TeamValueConfig] = None,
    adv_cfg: Optional[AdvantageConfig] = None,
    kernel_kind: str = "dot",
    kernel_params: Optional[dict] = None,
) -> RewardAssignment:
    """Full reward-construction pipeline for one rollout group.

    Kernel and team value, then cooperative credits, then redistribution,
    then both advantage vectors and their correction. Advantages are
    per-rollout scalars; broadcasting one advantage to every token of its
    rollout is the consumer's job.
    """
    team_cfg = team_cfg or TeamValueConfig()
    credit_cfg = credit_cfg or CreditConfig(eta=team_cfg.eta)
    adv_cfg = adv_cfg or AdvantageConfig()
    if credit_cfg.eta != team_cfg.eta:
        credit_cfg = replace(credit_cfg, eta=team_cfg.eta)

    rewards = group.rewards()
    if not (rewards > 0).any():
        zeros = np.zeros(group.size)
        report = CreditReport(credits=zeros.copy(), method_used="none", team_value_total=0.0)
        return RewardAssignment(
            rewards=rewards,
            redistributed=zeros.copy(),
            batch_total=0.0,
            credits=zeros.copy(),
            advantages_gcpo=zeros.copy(),
            advantages_grpo=zeros.copy(),
            corrections=zeros.copy(),
            report=report,
        )

    features = build_gated_features(group, adv_cfg.epsilon_num)
    kernel = build_kernel(features, kind=kernel_kind, params=kernel_params)
    report = compute_credits(features, credit_cfg, kernel)
    redistributed = redistribute(rewards, report.credits, adv_cfg.epsilon_num)
    a_grpo = normalized_advantages(rewards, adv_cfg)
    a_gcpo = normalized_advantages(redistributed, adv_cfg)
    return RewardAssignment(
        rewards=rewards,
        redistributed=redistributed,
        batch_total=math.fsum(rewards),
        credits=report.credits,
        advantages_gcpo=a_gcpo,
        advantages_grpo=a_grpo,
        corrections=advantage_correction(a_gcpo, a_grpo),
        report=report,
    )
