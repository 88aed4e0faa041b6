"""Regularized log-determinant team value and closed-form marginals.

The value of a coalition S of rollouts is v(S) = log det(I + eta * L_S),
the log-volume of the reward-gated similarity submatrix. Both the primal
|S| x |S| form and the dual d x d form (equal by Sylvester's determinant
identity) are provided, along with the rank-one closed form for the
marginal contribution of one rollout.
"""

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import FactorizationFailure, InvalidEigenvalue, InvalidParams
from .kernel import GatedFeatures, Kernel

#: diagonal jitter values tried, in order, before giving up on a factorization
JITTER_LADDER = (0.0, 1e-12, 1e-10, 1e-8)

EIG_TOLERANCE = 1e-8


@dataclass(frozen=True)
class TeamValueConfig:
    eta: float = 1.0
    #: extra diagonal jitter applied before the built-in retry ladder
    jitter: float = 0.0

    def __post_init__(self):
        if self.eta <= 0:
            raise InvalidParams("eta must be > 0")
        if self.jitter < 0:
            raise InvalidParams("jitter must be >= 0")


def logdet_psd(matrix: np.ndarray, base_jitter: float = 0.0) -> float:
    """log det of a symmetric positive definite matrix via Cholesky.

    Sums log of squared factor diagonals instead of forming the
    determinant, so large well-conditioned matrices cannot overflow.
    Retries with a small diagonal jitter before raising, since the
    matrices here are I + eta*L with L PSD and only rounding can break
    positive definiteness.
    """
    if matrix.shape[0] == 0:
        return 0.0
    for jitter in JITTER_LADDER:
        jitter = jitter + base_jitter
        try:
            target = matrix if jitter == 0.0 else matrix + jitter * np.eye(matrix.shape[0])
            chol = np.linalg.cholesky(target)
        except np.linalg.LinAlgError:
            continue
        return float(2.0 * np.sum(np.log(np.diagonal(chol))))
    raise FactorizationFailure(
        f"matrix of shape {matrix.shape} is not positive definite even after jitter"
    )


def _subset(indices: Iterable[int], size: int) -> np.ndarray:
    idx = np.asarray(list(indices), dtype=np.intp)
    if idx.size != np.unique(idx).size:
        raise InvalidParams("coalition indices must be distinct")
    if idx.size and (idx.min() < 0 or idx.max() >= size):
        raise InvalidParams(f"coalition indices out of range [0, {size})")
    return idx


def team_value(kernel: Kernel, subset: Sequence[int], cfg: Optional[TeamValueConfig] = None) -> float:
    """v(S) = log det(I + eta * L_S); the empty coalition has value 0."""
    cfg = cfg or TeamValueConfig()
    idx = _subset(subset, kernel.size)
    if idx.size == 0:
        return 0.0
    sub = kernel.matrix[np.ix_(idx, idx)]
    return logdet_psd(np.eye(idx.size) + cfg.eta * sub, cfg.jitter)


def team_value_dual(
    features: GatedFeatures, subset: Sequence[int], cfg: Optional[TeamValueConfig] = None
) -> float:
    """Dual form log det(I_d + eta * Z_S^T Z_S); equals team_value.

    Preferred when the coalition is larger than the embedding dimension,
    since the factorized matrix is d x d instead of |S| x |S|.
    """
    cfg = cfg or TeamValueConfig()
    idx = _subset(subset, features.size)
    if idx.size == 0:
        return 0.0
    Z = features.matrix[idx]
    return logdet_psd(np.eye(features.dim) + cfg.eta * (Z.T @ Z), cfg.jitter)


def team_value_features(
    features: GatedFeatures, subset: Sequence[int], cfg: Optional[TeamValueConfig] = None
) -> float:
    """Team value from gated features, picking the smaller factorization."""
    cfg = cfg or TeamValueConfig()
    idx = _subset(subset, features.size)
    if idx.size > features.dim:
        return team_value_dual(features, idx, cfg)
    if idx.size == 0:
        return 0.0
    Z = features.matrix[idx]
    return logdet_psd(np.eye(idx.size) + cfg.eta * (Z @ Z.T), cfg.jitter)


def spectral_team_value(eigenvalues: np.ndarray, eta: float) -> float:
    """v(S) = sum_l log(1 + eta * lambda_l) over the spectrum of L_S.

    Eigenvalues within -EIG_TOLERANCE of zero are clamped to zero; more
    negative entries indicate the input was not a PSD spectrum.
    """
    if eta <= 0:
        raise InvalidParams("eta must be > 0")
    lam = np.asarray(eigenvalues, dtype=np.float64)
    if lam.size == 0:
        return 0.0
    if np.any(lam < -EIG_TOLERANCE):
        raise InvalidEigenvalue(f"eigenvalue {lam.min():.3e} below -{EIG_TOLERANCE:.0e}")
    lam = np.maximum(lam, 0.0)
    return float(np.sum(np.log1p(eta * lam)))


def marginal_contribution(
    features: GatedFeatures,
    subset: Sequence[int],
    i: int,
    cfg: Optional[TeamValueConfig] = None,
) -> float:
    """Closed-form marginal value of adding rollout i to coalition S.

    Delta_i(S) = log(1 + eta r_i^2 zbar_i^T (I_d + eta Z_S^T Z_S)^{-1} zbar_i),
    which equals v(S u {i}) - v(S) and lies in [0, log(1 + eta r_i^2)].
    """
    cfg = cfg or TeamValueConfig()
    idx = _subset(subset, features.size)
    if i in idx:
        raise InvalidParams(f"rollout {i} is already in the coalition")
    if not 0 <= i < features.size:
        raise InvalidParams(f"rollout index {i} out of range")
    r_i = features.rewards[i]
    if r_i <= 0:
        return 0.0
    zbar = features.matrix[i] / r_i
    Z = features.matrix[idx]
    A = np.eye(features.dim) + cfg.eta * (Z.T @ Z)
    try:
        factor = cho_factor(A, lower=True)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - A >= I analytically
        raise FactorizationFailure(str(exc)) from exc
    quad = float(zbar @ cho_solve(factor, zbar))
    return float(np.log1p(cfg.eta * r_i**2 * quad))
