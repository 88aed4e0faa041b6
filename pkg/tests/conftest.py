"""Shared fixtures and independent oracles for the test suite.

The oracles deliberately avoid the library's own code paths: team values
go through numpy's slogdet and Shapley values through brute-force
permutation averaging, so agreement is evidence rather than tautology.
"""

import itertools
import math

import numpy as np
import pytest

from gcpo import GatedFeatures, Rollout, RolloutGroup, build_gated_features


def oracle_team_value(matrix: np.ndarray, subset, eta: float) -> float:
    """log det(I + eta * Z_S Z_S^T) via slogdet, independent of the library."""
    idx = list(subset)
    if not idx:
        return 0.0
    Z = matrix[idx]
    sign, logdet = np.linalg.slogdet(np.eye(len(idx)) + eta * (Z @ Z.T))
    assert sign > 0
    return float(logdet)


def oracle_shapley(features: GatedFeatures, eta: float) -> np.ndarray:
    """Brute-force Shapley credits by averaging over every permutation of P."""
    pos = list(np.flatnonzero(features.rewards > 0))
    credits = np.zeros(features.size)
    if not pos:
        return credits
    perms = list(itertools.permutations(pos))
    for perm in perms:
        prefix = []
        for i in perm:
            before = oracle_team_value(features.matrix, prefix, eta)
            prefix.append(i)
            after = oracle_team_value(features.matrix, prefix, eta)
            credits[i] += after - before
    return credits / len(perms)


def make_group(rng, size, dim, group_id="g", reward_kind="binary") -> RolloutGroup:
    """Random rollout group; at least the construction is guaranteed valid."""
    rollouts = []
    for i in range(size):
        z = rng.standard_normal(dim)
        if reward_kind == "binary":
            r = float(rng.integers(0, 2))
        else:
            r = float(rng.uniform(0.0, 2.0))
        rollouts.append(Rollout(id=f"{group_id}-{i}", embedding=z, reward=r))
    return RolloutGroup(group_id=group_id, rollouts=rollouts)


def duplicate_features(m: int) -> GatedFeatures:
    """m exact copies of the same correct unit-norm rollout."""
    group = RolloutGroup(
        group_id="dup",
        rollouts=[Rollout(id=str(i), embedding=np.array([1.0, 0.0]), reward=1.0) for i in range(m)],
    )
    return build_gated_features(group)


def orthogonal_features(m: int) -> GatedFeatures:
    group = RolloutGroup(
        group_id="orth",
        rollouts=[Rollout(id=str(i), embedding=np.eye(m)[i], reward=1.0) for i in range(m)],
    )
    return build_gated_features(group)


@pytest.fixture
def mixed_group() -> RolloutGroup:
    """Two duplicate correct rollouts plus one orthogonal correct rollout."""
    return RolloutGroup(
        group_id="mixed",
        rollouts=[
            Rollout(id="a", embedding=np.array([1.0, 0.0]), reward=1.0),
            Rollout(id="b", embedding=np.array([1.0, 0.0]), reward=1.0),
            Rollout(id="c", embedding=np.array([0.0, 1.0]), reward=1.0),
        ],
    )


# exact credits for mixed_group at eta=1, from brute-force enumeration of
# the 6 coalition orders: duplicates 0.5*ln3 each, orthogonal ln2
MIXED_CREDITS = np.array([0.5 * math.log(3.0), 0.5 * math.log(3.0), math.log(2.0)])
