"""Synthetic verifier-reward training loop over a categorical policy.

Each rollout is a single categorical choice among M "reasoning modes",
each mode owning a unit embedding direction and a correctness
probability. Episodes are one token long, so the clipped surrogate and
its gradients are exact closed forms and the advantage-correction
decomposition can be checked to machine precision. The loop contrasts
raw-reward advantages (grpo) with redistributed-reward advantages (gcpo)
and records entropy, team value, accuracy, and pass@k per step.
"""

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .credit import CreditConfig
from .errors import InvalidParams
from .kernel import Rollout, RolloutGroup, build_gated_features, build_kernel
from .metrics import pass_at_k
from .redistribution import (
    AdvantageConfig,
    RewardAssignment,
    assign_group_rewards,
    normalized_advantages,
)
from .team_value import TeamValueConfig, team_value


@dataclass(frozen=True)
class ReasoningMode:
    """One latent solution strategy: direction, correctness rate, noise."""

    direction: np.ndarray
    p_correct: float
    noise_scale: float = 0.0

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=np.float64)
        if not math.isclose(float(np.linalg.norm(d)), 1.0, rel_tol=0, abs_tol=1e-9):
            raise InvalidParams("mode direction must have unit norm")
        if not 0.0 <= self.p_correct <= 1.0:
            raise InvalidParams("p_correct must be in [0, 1]")
        object.__setattr__(self, "direction", d)


@dataclass(frozen=True)
class SyntheticTask:
    modes: Sequence[ReasoningMode]
    prompt_count: int = 1

    def __post_init__(self):
        if len(self.modes) < 1 or self.prompt_count < 1:
            raise InvalidParams("need at least one mode and one prompt")
        dims = {m.direction.shape[0] for m in self.modes}
        if len(dims) != 1:
            raise InvalidParams("mode directions must share a dimension")
        object.__setattr__(self, "modes", tuple(self.modes))

    @property
    def num_modes(self) -> int:
        return len(self.modes)

    @property
    def dim(self) -> int:
        return self.modes[0].direction.shape[0]


def default_task(dim: int = 8, noise_scale: float = 0.0) -> SyntheticTask:
    """Toy task exercising duplicate-vs-novel credit routing.

    Six modes in `dim` dimensions: two orthogonal correct modes, one
    correct mode nearly collinear (cosine 0.95) with the first, and three
    incorrect modes on further orthogonal axes.
    """
    if dim < 6:
        raise InvalidParams("default task needs dim >= 6")
    e = np.eye(dim)
    collinear = 0.95 * e[0] + math.sqrt(1.0 - 0.95**2) * e[5]
    modes = (
        ReasoningMode(e[0], 0.9, noise_scale),
        ReasoningMode(e[1], 0.9, noise_scale),
        ReasoningMode(collinear, 0.9, noise_scale),
        ReasoningMode(e[2], 0.0, noise_scale),
        ReasoningMode(e[3], 0.0, noise_scale),
        ReasoningMode(e[4], 0.0, noise_scale),
    )
    return SyntheticTask(modes=modes)


@dataclass(frozen=True)
class PolicyState:
    """Categorical policy logits per prompt plus frozen reference logits."""

    logits: np.ndarray
    ref_logits: np.ndarray

    @classmethod
    def uniform(cls, prompt_count: int, num_modes: int) -> "PolicyState":
        z = np.zeros((prompt_count, num_modes))
        return cls(logits=z, ref_logits=z.copy())

    def probs(self, prompt: int = 0) -> np.ndarray:
        return softmax(self.logits[prompt])


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits)
    e = np.exp(shifted)
    return e / e.sum()


def entropy(probs: np.ndarray) -> float:
    p = probs[probs > 0]
    return float(-np.sum(p * np.log(p)))


@dataclass(frozen=True)
class TrainConfig:
    algorithm: str = "gcpo"
    group_size: int = 8
    learning_rate: float = 0.5
    steps: int = 200
    eta: float = 1.0
    beta: float = 0.0
    clip_low: float = 0.2
    clip_high: float = 0.28
    seed: int = 0
    credit_mode: str = "auto"
    pass_k: int = 4
    #: refresh the old policy every k steps; 1 keeps the loop on-policy
    old_refresh_every: int = 1

    def __post_init__(self):
        if self.algorithm not in ("grpo", "gcpo"):
            raise InvalidParams(f"unknown algorithm {self.algorithm!r}")
        if self.group_size < 2:
            raise InvalidParams("group_size must be >= 2")
        if self.learning_rate < 0:
            raise InvalidParams("learning_rate must be >= 0")


def sample_group(
    task: SyntheticTask,
    policy: PolicyState,
    group_size: int,
    seed,
    prompt: int = 0,
) -> RolloutGroup:
    """Draw one rollout group from the policy's categorical distribution.

    `seed` may be an integer or a numpy Generator. Each rollout's id ends
    in "-m<k>" where k is the sampled mode index.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.Generator(np.random.Philox(key=seed))
    group, _, _ = _sample(task, policy.probs(prompt), group_size, rng, prompt)
    return group


def _sample(
    task: SyntheticTask, probs: np.ndarray, group_size: int, rng: np.random.Generator, prompt: int
) -> Tuple[RolloutGroup, np.ndarray, np.ndarray]:
    modes = rng.choice(task.num_modes, size=group_size, p=probs)
    rollouts = []
    rewards = np.empty(group_size)
    for i, k in enumerate(modes):
        mode = task.modes[k]
        emb = mode.direction
        if mode.noise_scale > 0:
            emb = emb + mode.noise_scale * rng.standard_normal(task.dim)
            emb = emb / np.linalg.norm(emb)
        rewards[i] = 1.0 if rng.random() < mode.p_correct else 0.0
        rollouts.append(Rollout(id=f"p{prompt}-r{i}-m{k}", embedding=emb, reward=rewards[i]))
    return RolloutGroup(group_id=f"p{prompt}", rollouts=rollouts), modes, rewards


def modes_of(group: RolloutGroup) -> np.ndarray:
    """Recover sampled mode indices from the id convention of sample_group."""
    return np.array([int(r.id.rsplit("-m", 1)[1]) for r in group.rollouts])


def log_prob_gradient(probs: np.ndarray, mode: int) -> np.ndarray:
    """d log pi(mode) / d logits for a categorical softmax policy."""
    g = -probs.copy()
    g[mode] += 1.0
    return g


def unclipped_surrogate_gradient(
    probs: np.ndarray, modes: np.ndarray, advantages: np.ndarray
) -> np.ndarray:
    """Gradient of (1/G) sum_i log pi(m_i) * A_i with stop-gradient advantages."""
    grad = np.zeros_like(probs)
    for k, a in zip(modes, advantages):
        grad += a * log_prob_gradient(probs, k)
    return grad / len(modes)


def clipped_surrogate_gradient(
    probs: np.ndarray,
    old_probs: np.ndarray,
    modes: np.ndarray,
    advantages: np.ndarray,
    clip_low: float,
    clip_high: float,
) -> np.ndarray:
    """Gradient of the PPO-clipped surrogate for one-token episodes."""
    grad = np.zeros_like(probs)
    for k, a in zip(modes, advantages):
        rho = probs[k] / old_probs[k]
        unclipped = rho * a
        clipped = np.clip(rho, 1.0 - clip_low, 1.0 + clip_high) * a
        if unclipped <= clipped:  # the min() selects the differentiable branch
            grad += a * rho * log_prob_gradient(probs, k)
    return grad / len(modes)


def kl_gradient(probs: np.ndarray, ref_probs: np.ndarray) -> np.ndarray:
    """d KL(pi || ref) / d logits in closed categorical form."""
    log_ratio = np.log(probs) - np.log(ref_probs)
    kl = float(np.sum(probs * log_ratio))
    return probs * (log_ratio - kl)


def policy_update(
    policy: PolicyState,
    group: RolloutGroup,
    advantages: np.ndarray,
    cfg: TrainConfig,
    prompt: int = 0,
    old_logits: Optional[np.ndarray] = None,
) -> PolicyState:
    """One ascent step on the clipped surrogate minus the KL penalty.

    Importance ratios are computed against `old_logits` (defaults to the
    pre-step logits, i.e. a fully on-policy ratio of one).
    """
    if len(advantages) != group.size:
        raise InvalidParams("advantages length must match group size")
    modes = modes_of(group)
    probs = policy.probs(prompt)
    old = probs if old_logits is None else softmax(old_logits[prompt])
    grad = clipped_surrogate_gradient(probs, old, modes, advantages, cfg.clip_low, cfg.clip_high)
    if cfg.beta != 0.0:
        grad = grad - cfg.beta * kl_gradient(probs, softmax(policy.ref_logits[prompt]))
    logits = policy.logits.copy()
    logits[prompt] += cfg.learning_rate * grad
    return PolicyState(logits=logits, ref_logits=policy.ref_logits)


@dataclass
class DynamicsLog:
    """Per-step training trace; one row per step, averaged over prompts."""

    num_modes: int
    steps: List[int] = field(default_factory=list)
    entropy: List[float] = field(default_factory=list)
    team_value: List[float] = field(default_factory=list)
    accuracy: List[float] = field(default_factory=list)
    pass_at_k: List[float] = field(default_factory=list)
    mode_probs: List[np.ndarray] = field(default_factory=list)

    def header(self) -> List[str]:
        return ["step", "entropy", "team_value", "accuracy", "pass_at_k"] + [
            f"mode_prob_{j}" for j in range(self.num_modes)
        ]

    def write_csv(self, stream) -> None:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(self.header())
        for i, step in enumerate(self.steps):
            writer.writerow(
                [
                    step,
                    repr(self.entropy[i]),
                    repr(self.team_value[i]),
                    repr(self.accuracy[i]),
                    repr(self.pass_at_k[i]),
                ]
                + [repr(float(p)) for p in self.mode_probs[i]]
            )


@dataclass(frozen=True)
class StepInfo:
    """Inputs of one training step, handed to the run_training hook."""

    step: int
    prompt: int
    group: RolloutGroup
    probs: np.ndarray
    modes: np.ndarray
    advantages: np.ndarray
    assignment: Optional[RewardAssignment]


def run_training(
    task: SyntheticTask,
    cfg: TrainConfig,
    on_step: Optional[Callable[[StepInfo], None]] = None,
) -> DynamicsLog:
    """Run the sample / credit / update loop and return the dynamics trace.

    Deterministic for a fixed config: all randomness flows from one
    Philox stream keyed by cfg.seed.
    """
    rng = np.random.Generator(np.random.Philox(key=cfg.seed))
    policy = PolicyState.uniform(task.prompt_count, task.num_modes)
    team_cfg = TeamValueConfig(eta=cfg.eta)
    credit_cfg = CreditConfig(eta=cfg.eta, mode=cfg.credit_mode, seed=cfg.seed)
    adv_cfg = AdvantageConfig()
    log = DynamicsLog(num_modes=task.num_modes)
    old_logits = policy.logits.copy()
    k_eval = min(cfg.pass_k, cfg.group_size)

    for step in range(cfg.steps):
        if step % cfg.old_refresh_every == 0:
            old_logits = policy.logits.copy()
        ent = acc = tv = pk = 0.0
        probs_mean = np.zeros(task.num_modes)
        new_policy = policy
        for prompt in range(task.prompt_count):
            probs = policy.probs(prompt)
            group, modes, rewards = _sample(task, probs, cfg.group_size, rng, prompt)
            assignment = None
            if cfg.algorithm == "gcpo":
                assignment = assign_group_rewards(group, credit_cfg, team_cfg, adv_cfg)
                advantages = assignment.advantages_gcpo
            else:
                advantages = normalized_advantages(rewards, adv_cfg)
            # logged the same way for both algorithms so symmetric tasks
            # produce identical traces
            kern = build_kernel(build_gated_features(group, adv_cfg.epsilon_num))
            v_group = team_value(kern, range(group.size), team_cfg)
            if on_step is not None:
                on_step(
                    StepInfo(
                        step=step,
                        prompt=prompt,
                        group=group,
                        probs=probs,
                        modes=modes,
                        advantages=advantages,
                        assignment=assignment,
                    )
                )
            new_policy = policy_update(
                new_policy, group, advantages, cfg, prompt=prompt, old_logits=old_logits
            )
            ent += entropy(probs)
            acc += float(rewards.mean())
            tv += v_group
            pk += pass_at_k(cfg.group_size, int(rewards.sum()), k_eval)
            probs_mean += probs
        policy = new_policy
        n = task.prompt_count
        log.steps.append(step)
        log.entropy.append(ent / n)
        log.team_value.append(tv / n)
        log.accuracy.append(acc / n)
        log.pass_at_k.append(pk / n)
        log.mode_probs.append(probs_mean / n)
    return log
