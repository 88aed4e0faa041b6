"""Rollout containers and the reward-gated similarity kernel.

Each rollout carries a semantic embedding z and a non-negative verifier
reward r. Embeddings are projected onto the unit sphere and scaled by
their reward, so the Gram matrix L couples quality and diversity:
L_ij = r_i r_j <z_i/|z_i|, z_j/|z_j|>. Zero-reward rollouts gate their
row and column of L to zero under every kernel variant.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np

from .errors import DegenerateEmbedding, InvalidParams

DEFAULT_EPSILON_NUM = 1e-8

KERNEL_KINDS = ("dot", "rbf", "laplacian", "polynomial")


@dataclass(frozen=True)
class Rollout:
    """One sampled response: opaque id, embedding vector, verifier reward."""

    id: str
    embedding: np.ndarray
    reward: float

    def __post_init__(self):
        emb = np.asarray(self.embedding, dtype=np.float64)
        if emb.ndim != 1 or emb.size < 1:
            raise InvalidParams(f"rollout {self.id!r}: embedding must be a 1-d vector")
        if not np.all(np.isfinite(emb)):
            raise InvalidParams(f"rollout {self.id!r}: embedding has non-finite entries")
        if not np.isfinite(self.reward) or self.reward < 0:
            raise InvalidParams(f"rollout {self.id!r}: reward must be finite and >= 0")
        object.__setattr__(self, "embedding", emb)
        object.__setattr__(self, "reward", float(self.reward))


@dataclass(frozen=True)
class RolloutGroup:
    """The G rollouts sampled for one query; the unit of credit assignment."""

    group_id: str
    rollouts: Sequence[Rollout]

    def __post_init__(self):
        if len(self.rollouts) < 1:
            raise InvalidParams(f"group {self.group_id!r}: needs at least one rollout")
        dims = {r.embedding.shape[0] for r in self.rollouts}
        if len(dims) != 1:
            raise InvalidParams(
                f"group {self.group_id!r}: inconsistent embedding dimensions {sorted(dims)}"
            )
        object.__setattr__(self, "rollouts", tuple(self.rollouts))

    @property
    def size(self) -> int:
        return len(self.rollouts)

    @property
    def dim(self) -> int:
        return self.rollouts[0].embedding.shape[0]

    def rewards(self) -> np.ndarray:
        return np.array([r.reward for r in self.rollouts], dtype=np.float64)

    def embeddings(self) -> np.ndarray:
        return np.stack([r.embedding for r in self.rollouts])


@dataclass(frozen=True)
class GatedFeatures:
    """Reward-gated unit-normalized embeddings, one row per rollout.

    Row i is r_i * z_i / ||z_i||_2; rows with zero reward are exactly zero.
    """

    matrix: np.ndarray
    rewards: np.ndarray
    epsilon_num: float = DEFAULT_EPSILON_NUM

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def positive_indices(self) -> np.ndarray:
        """Indices of positive-reward rollouts (the Shapley player set)."""
        return np.flatnonzero(self.rewards > 0)

    def directions(self) -> np.ndarray:
        """Unit directions for positive-reward rows; zero rows elsewhere."""
        out = np.zeros_like(self.matrix)
        pos = self.positive_indices()
        out[pos] = self.matrix[pos] / self.rewards[pos, None]
        return out


@dataclass(frozen=True)
class Kernel:
    """Symmetric PSD G x G matrix of reward-gated similarities."""

    matrix: np.ndarray
    kind: str = "dot"
    params: Dict[str, float] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def build_gated_features(group: RolloutGroup, epsilon_num: float = DEFAULT_EPSILON_NUM) -> GatedFeatures:
    """Normalize each embedding to unit length and scale it by its reward.

    Zero-reward rollouts are gated to the zero row regardless of their
    embedding; a positive-reward rollout whose embedding norm is below
    ``epsilon_num`` is a data bug and raises ``DegenerateEmbedding``.
    """
    if epsilon_num <= 0:
        raise InvalidParams("epsilon_num must be > 0")
    Z = group.embeddings()
    r = group.rewards()
    out = np.zeros_like(Z)
    for i, rollout in enumerate(group.rollouts):
        if r[i] <= 0:
            continue
        norm = np.linalg.norm(Z[i])
        if norm <= epsilon_num:
            raise DegenerateEmbedding(
                f"rollout {rollout.id!r}: positive reward but embedding norm {norm:.3e}"
            )
        out[i] = r[i] * Z[i] / norm
    return GatedFeatures(matrix=out, rewards=r, epsilon_num=float(epsilon_num))


def build_kernel(
    features: GatedFeatures,
    kind: str = "dot",
    params: Optional[Dict[str, float]] = None,
) -> Kernel:
    """Build the reward-gated similarity matrix for one rollout group.

    kind="dot" gives the Gram matrix of the gated features. The rbf,
    laplacian, and polynomial variants apply the base kernel to the unit
    directions and keep the r_i r_j gating outside, so zero-reward rows
    and columns stay identically zero.
    """
    params = dict(params or {})
    if kind not in KERNEL_KINDS:
        raise InvalidParams(f"unknown kernel kind {kind!r}; expected one of {KERNEL_KINDS}")

    r = features.rewards
    if kind == "dot":
        L = features.matrix @ features.matrix.T
    else:
        zbar = features.directions()
        gate = np.outer(r, r)
        if kind == "rbf":
            sigma = float(params.setdefault("sigma", 1.0))
            if sigma <= 0:
                raise InvalidParams("rbf kernel needs sigma > 0")
            sq = np.sum(zbar**2, axis=1)
            d2 = sq[:, None] + sq[None, :] - 2.0 * (zbar @ zbar.T)
            np.maximum(d2, 0.0, out=d2)
            L = gate * np.exp(-d2 / (2.0 * sigma**2))
        elif kind == "laplacian":
            sigma = float(params.setdefault("sigma", 1.0))
            if sigma <= 0:
                raise InvalidParams("laplacian kernel needs sigma > 0")
            d1 = np.sum(np.abs(zbar[:, None, :] - zbar[None, :, :]), axis=2)
            L = gate * np.exp(-d1 / sigma)
        else:  # polynomial
            c = float(params.setdefault("c", 0.5))
            degree = int(params.setdefault("degree", 2))
            if degree < 1:
                raise InvalidParams("polynomial kernel needs degree >= 1")
            L = gate * (zbar @ zbar.T + c) ** degree

    L = 0.5 * (L + L.T)
    # reward gating must hold exactly, not just up to rounding
    zero = r <= 0
    L[zero, :] = 0.0
    L[:, zero] = 0.0
    return Kernel(matrix=L, kind=kind, params=params)
