"""In-process bindings exposing group reward assignment to RL trainers.

The trainer hands over its embedding and reward buffers as array views;
contiguous float64 input is wrapped without copying on the call path.
Each call validates shapes up front, runs the full gcpo reward pipeline
(credits, redistribution, both advantage vectors), and returns a plain
mapping the host framework can unpack. Calls are stateless and
reentrant, so concurrent invocation from multiple trainer threads is
safe; the heavy linear algebra runs inside BLAS and compiled kernels
that release the interpreter lock.
"""

import warnings
from typing import Sequence, Tuple

import numpy as np

from gcpo import (
    CreditConfig,
    Rollout,
    RolloutGroup,
    TeamValueConfig,
    assign_group_rewards,
)
from gcpo.errors import InvalidParams
from gcpo.redistribution import AdvantageConfig

__version__ = "0.1.0"

__all__ = ["assign_rewards", "assign_rewards_batch", "__version__"]

_warned_noncontiguous = False


def _as_view(name: str, array, ndim: int) -> np.ndarray:
    """Wrap a host buffer as a float64 array, copying only when forced.

    Non-contiguous or non-float64 input (sliced trainer tensors, lists)
    is copied; the first such copy emits a RuntimeWarning so silent
    overhead is visible once per process.
    """
    global _warned_noncontiguous
    out = np.asarray(array, dtype=np.float64)
    if out.ndim != ndim:
        raise InvalidParams(f"{name} must be a {ndim}-d array, got ndim={out.ndim}")
    if not out.flags["C_CONTIGUOUS"]:
        if not _warned_noncontiguous:
            warnings.warn(
                f"{name} is not contiguous; copying "
                "(further copies will not be reported)",
                RuntimeWarning,
                stacklevel=3,
            )
            _warned_noncontiguous = True
        out = np.ascontiguousarray(out)
    return out


def _validate_pair(embeddings, rewards) -> Tuple[np.ndarray, np.ndarray]:
    emb = _as_view("embeddings", embeddings, 2)
    rew = _as_view("rewards", rewards, 1)
    if emb.shape[0] != rew.shape[0]:
        raise InvalidParams(
            f"embeddings hold {emb.shape[0]} rows but rewards has length {rew.shape[0]}"
        )
    if emb.shape[0] < 1:
        raise InvalidParams("need at least one rollout")
    return emb, rew


def _configs(options):
    eta = float(options.pop("eta", 1.0))
    team_cfg = TeamValueConfig(eta=eta, jitter=float(options.pop("jitter", 0.0)))
    credit_cfg = CreditConfig(
        eta=eta,
        mode=options.pop("mode", "auto"),
        permutations=options.pop("permutations", None),
        epsilon=float(options.pop("epsilon", 0.05)),
        delta=float(options.pop("delta", 0.05)),
        seed=int(options.pop("seed", 0)),
    )
    adv_cfg = AdvantageConfig(epsilon_num=float(options.pop("epsilon_num", 1e-8)))
    kernel_kind = options.pop("kernel", "dot")
    kernel_params = options.pop("kernel_params", None)
    if options:
        raise InvalidParams(f"unknown options: {sorted(options)}")
    return credit_cfg, team_cfg, adv_cfg, kernel_kind, kernel_params


def _compute(emb, rew, credit_cfg, team_cfg, adv_cfg, kernel_kind, kernel_params):
    group = RolloutGroup(
        group_id="host",
        rollouts=[
            Rollout(id=str(i), embedding=emb[i], reward=float(rew[i]))
            for i in range(emb.shape[0])
        ],
    )
    result = assign_group_rewards(
        group, credit_cfg, team_cfg, adv_cfg, kernel_kind=kernel_kind, kernel_params=kernel_params
    )
    return {
        "credits": result.credits,
        "redistributed": result.redistributed,
        "advantage_gcpo": result.advantages_gcpo,
        "advantage_grpo": result.advantages_grpo,
        "delta_advantage": result.corrections,
        "team_value": result.report.team_value_total,
    }


def assign_rewards(embeddings, rewards, **options) -> dict:
    """Run gcpo reward construction on one rollout group.

    Parameters
    ----------
    embeddings : (G, d) array view
        One semantic embedding per rollout.
    rewards : (G,) array view
        Non-negative verifier rewards.
    **options
        eta, mode, permutations, epsilon, delta, seed, jitter,
        epsilon_num, kernel, kernel_params — mirroring the gcpo configs.

    Returns
    -------
    dict
        Keys credits, redistributed, advantage_gcpo, advantage_grpo,
        delta_advantage (arrays of length G) and team_value (float).
        Identical, bit for bit at equal seed, to calling
        gcpo.assign_group_rewards directly.
    """
    emb, rew = _validate_pair(embeddings, rewards)
    cfgs = _configs(dict(options))
    return _compute(emb, rew, *cfgs)


def assign_rewards_batch(
    groups: Sequence[Tuple], **options
) -> list:
    """Assign rewards for many (embeddings, rewards) pairs in one call.

    Amortizes the call-boundary overhead for trainers that score a whole
    batch of prompts at once. Every group's shapes are validated before
    any group is computed, so a malformed entry fails the batch early.
    """
    validated = [_validate_pair(emb, rew) for emb, rew in groups]
    cfgs = _configs(dict(options))
    return [_compute(emb, rew, *cfgs) for emb, rew in validated]
