"""Per-rollout cooperative credits from coalition marginal contributions.

Three estimators over the positive-reward player set P:

* exact Shapley by full subset enumeration (feasible up to |P| ~ 12),
* leave-one-out scores v(P) - v(P \\ {i}),
* an unbiased Monte-Carlo permutation estimator whose per-permutation
  marginals are produced by incremental Cholesky extension, so they
  telescope to v(P) and the efficiency identity holds for any K.
"""

import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numba
import numpy as np
from scipy.linalg import solve_triangular

from .errors import GroupTooLarge, InvalidParams, SchurNotPositive
from .kernel import GatedFeatures, Kernel, build_kernel
from .team_value import logdet_psd

DEFAULT_EXACT_CUTOFF = 12


@dataclass(frozen=True)
class CreditConfig:
    """Knobs for credit estimation.

    mode "auto" uses exact enumeration while |P| <= exact_cutoff and the
    permutation estimator beyond. permutations=None sizes K from the
    Hoeffding bound at (epsilon, delta).
    """

    eta: float = 1.0
    mode: str = "auto"
    exact_cutoff: int = DEFAULT_EXACT_CUTOFF
    permutations: Optional[int] = None
    epsilon: float = 0.05
    delta: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.eta <= 0:
            raise InvalidParams("eta must be > 0")
        if self.mode not in ("exact", "loo", "monte_carlo", "auto"):
            raise InvalidParams(f"unknown credit mode {self.mode!r}")
        if self.exact_cutoff < 1:
            raise InvalidParams("exact_cutoff must be >= 1")
        if self.permutations is not None and self.permutations < 1:
            raise InvalidParams("permutations must be >= 1")
        if self.epsilon <= 0:
            raise InvalidParams("epsilon must be > 0")
        if not 0 < self.delta < 1:
            raise InvalidParams("delta must be in (0, 1)")


@dataclass(frozen=True)
class CreditReport:
    """Per-rollout credits plus diagnostics of how they were computed."""

    credits: np.ndarray
    method_used: str
    team_value_total: float
    permutations_used: int = 0
    error_bound: float = 0.0


@dataclass
class CholeskyState:
    """Lower-triangular factor of I + eta*L_S for a growing coalition prefix.

    Single-owner mutable value: extend() returns a new state and must not
    be shared across threads.
    """

    factor: np.ndarray
    logdet: float = 0.0

    @classmethod
    def empty(cls) -> "CholeskyState":
        return cls(factor=np.zeros((0, 0)), logdet=0.0)

    @property
    def size(self) -> int:
        return self.factor.shape[0]


def required_permutations(
    m: int, eta: float, epsilon: float, delta: float, max_reward: float = 1.0
) -> int:
    """Smallest K with Hoeffding max-error <= epsilon at confidence 1-delta.

    K >= b^2 / (2 eps^2) * log(2m/delta) with range b = log(1 + eta*r_max^2);
    r_max defaults to 1 for binary verifier rewards. Clamped to at least 1.
    """
    if m < 1:
        raise InvalidParams("m must be >= 1")
    if epsilon <= 0 or not 0 < delta < 1 or eta <= 0:
        raise InvalidParams("need epsilon > 0, 0 < delta < 1, eta > 0")
    b = math.log1p(eta * max_reward**2)
    if b <= 0:
        return 1
    k = math.ceil(b**2 / (2.0 * epsilon**2) * math.log(2.0 * m / delta))
    return max(1, int(k))


def hoeffding_error_bound(
    m: int, eta: float, permutations: int, delta: float, max_reward: float = 1.0
) -> float:
    """Max-error epsilon implied by Hoeffding at a given K and delta."""
    b = math.log1p(eta * max_reward**2)
    return b * math.sqrt(math.log(2.0 * m / delta) / (2.0 * permutations))


def cholesky_extend(
    state: CholeskyState, kernel_column: np.ndarray, a_i: float, eta: float
) -> Tuple[CholeskyState, float]:
    """Extend the factor of I + eta*L_S by one rollout and return its marginal.

    kernel_column holds L_{S,i} in coalition order and a_i = 1 + eta*L_ii.
    Solves C y = eta * L_{S,i}; the Schur complement s_i = a_i - |y|^2 gives
    the marginal log(s_i) = v(S u {i}) - v(S), and the factor grows by the
    row [y^T, sqrt(s_i)].
    """
    t = state.size
    col = np.asarray(kernel_column, dtype=np.float64)
    if col.shape != (t,):
        raise InvalidParams(f"kernel_column must have length {t}, got {col.shape}")
    if t == 0:
        y = np.zeros(0)
        s_i = float(a_i)
    else:
        y = solve_triangular(state.factor, eta * col, lower=True)
        s_i = float(a_i - y @ y)
    if s_i <= 0.0:
        s_i += 1e-12  # jitter; s_i > 0 analytically whenever L is PSD
        if s_i <= 0.0:
            raise SchurNotPositive(f"Schur complement {s_i:.3e} <= 0")
    new_factor = np.zeros((t + 1, t + 1))
    new_factor[:t, :t] = state.factor
    new_factor[t, :t] = y
    new_factor[t, t] = math.sqrt(s_i)
    marginal = math.log(s_i)
    return CholeskyState(factor=new_factor, logdet=state.logdet + marginal), marginal


def _positive_kernel(features, cfg, kernel):
    """(I + eta*L) restricted to positive-reward players, plus their indices."""
    pos = np.flatnonzero(features.rewards > 0)
    if kernel is None:
        # dot kernel on the gated rows; restricting first avoids the full
        # m x m Gram when only positive-reward players matter
        X = features.matrix if pos.size == features.size else features.matrix[pos]
        G = X @ X.T
        A = cfg.eta * 0.5 * (G + G.T)
        A[np.diag_indices_from(A)] += 1.0
    else:
        A = np.eye(pos.size) + cfg.eta * kernel.matrix[np.ix_(pos, pos)]
    return pos, A


_POPCOUNT = None


def _popcounts(n_masks: int) -> np.ndarray:
    global _POPCOUNT
    if _POPCOUNT is None or _POPCOUNT.size < n_masks:
        masks = np.arange(max(n_masks, 2), dtype=np.uint32)
        pc = np.zeros_like(masks)
        while masks.any():
            pc += masks & 1
            masks >>= 1
        _POPCOUNT = pc.astype(np.intp)
    return _POPCOUNT[:n_masks]


def exact_shapley(
    features: GatedFeatures,
    cfg: Optional[CreditConfig] = None,
    kernel: Optional[Kernel] = None,
) -> CreditReport:
    """Exact Shapley credits by enumerating every coalition of P.

    Caches v(S) for all 2^|P| subsets once, then assembles each credit as
    the weighted sum of marginal contributions. Zero-reward rollouts get
    exactly zero credit.
    """
    cfg = cfg or CreditConfig()
    pos, A = _positive_kernel(features, cfg, kernel)
    m = pos.size
    credits = np.zeros(features.size)
    if m == 0:
        return CreditReport(credits=credits, method_used="exact", team_value_total=0.0)
    if m > cfg.exact_cutoff:
        raise GroupTooLarge(
            f"|P| = {m} exceeds exact_cutoff {cfg.exact_cutoff}; use monte_carlo mode"
        )

    n_masks = 1 << m
    values = np.empty(n_masks)
    values[0] = 0.0
    members = [np.flatnonzero([(mask >> j) & 1 for j in range(m)]) for mask in range(n_masks)]
    for mask in range(1, n_masks):
        sub = members[mask]
        values[mask] = logdet_psd(A[np.ix_(sub, sub)])

    pc = _popcounts(n_masks)
    fact = [math.factorial(s) for s in range(m + 1)]
    weights = np.array([fact[s] * fact[m - s - 1] / fact[m] for s in range(m)])
    all_masks = np.arange(n_masks)
    for j in range(m):
        bit = 1 << j
        without = all_masks[(all_masks & bit) == 0]
        diffs = values[without | bit] - values[without]
        credits[pos[j]] = float(np.dot(weights[pc[without]], diffs))

    return CreditReport(
        credits=credits,
        method_used="exact",
        team_value_total=float(values[n_masks - 1]),
    )


def loo_credits(
    features: GatedFeatures,
    cfg: Optional[CreditConfig] = None,
    kernel: Optional[Kernel] = None,
) -> CreditReport:
    """Leave-one-out scores v(P) - v(P \\ {i}); no efficiency guarantee."""
    cfg = cfg or CreditConfig()
    pos, A = _positive_kernel(features, cfg, kernel)
    m = pos.size
    credits = np.zeros(features.size)
    if m == 0:
        return CreditReport(credits=credits, method_used="loo", team_value_total=0.0)
    v_full = logdet_psd(A)
    for j in range(m):
        rest = np.delete(np.arange(m), j)
        credits[pos[j]] = v_full - logdet_psd(A[np.ix_(rest, rest)])
    return CreditReport(credits=credits, method_used="loo", team_value_total=float(v_full))


_SPLITMIX_GAMMA = np.uint64(0x9E3779B97F4A7C15)


@numba.njit(numba.uint64(numba.uint64), cache=True, inline="always")
def _splitmix64(x):  # pragma: no cover - exercised via mc_shapley
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


_RENORM_HI = 2.0**512
_RENORM_LO = 2.0**-512
_LN2 = float(np.log(2.0))


@numba.njit(cache=True)
def _permutation_marginals(A, seed, n_perms):  # pragma: no cover - via mc_shapley
    """Accumulate marginal log-dets along sampled permutations of the players.

    Permutation k is a Fisher-Yates shuffle driven by its own splitmix64
    stream (state seed + k*gamma, rejection sampling for unbiased bounded
    draws), so results are reproducible per permutation index regardless
    of scheduling. Each permutation extends a Cholesky factor of
    I + eta*L_S one player at a time; the step-t Schur complement s gives
    that player's marginal contribution log(s). Per player the Schur
    complements are accumulated as a running product with a base-2
    exponent carried separately, so only one log per player is taken at
    the end. O(K m^3) time, O(m^2) memory.
    """
    m = A.shape[0]
    prod = np.ones(m)
    expo = np.zeros(m, dtype=np.int64)
    v_total = 0.0
    C = np.empty((m, m))
    inv_diag = np.empty(m)
    perm = np.empty(m, dtype=np.int64)
    for k in range(n_perms):
        ctr = np.uint64(seed) + np.uint64(k) * _SPLITMIX_GAMMA
        for j in range(m):
            perm[j] = j
        for j in range(m - 1, 0, -1):
            bound = np.uint64(j + 1)
            reject = (np.uint64(0) - bound) % bound
            while True:
                ctr += _SPLITMIX_GAMMA
                draw = _splitmix64(ctr)
                if draw >= reject:
                    break
            swap = np.int64(draw % bound)
            perm[j], perm[swap] = perm[swap], perm[j]
        for t in range(m):
            i = perm[t]
            s_i = A[i, i]
            y = C[t]
            for row in range(t):
                acc = A[perm[row], i]
                for col in range(row):
                    acc -= C[row, col] * y[col]
                y_row = acc * inv_diag[row]
                y[row] = y_row
                s_i -= y_row * y_row
            if s_i <= 0.0:
                s_i += 1e-12
                if s_i <= 0.0:
                    return prod, 0.0, -1
            root = np.sqrt(s_i)
            C[t, t] = root
            inv_diag[t] = 1.0 / root
            p = prod[i] * s_i
            if p > _RENORM_HI:
                p *= _RENORM_LO
                expo[i] += 512
            elif p < _RENORM_LO:
                p *= _RENORM_HI
                expo[i] -= 512
            prod[i] = p
            if k == 0:
                v_total += np.log(s_i)  # telescopes to log det(I + eta*L_P)
    credits = np.empty(m)
    for i in range(m):
        credits[i] = np.log(prod[i]) + _LN2 * expo[i]
    return credits, v_total, 0


@numba.njit(cache=True)
def _mc_core(X, eta, seed, n_perms):  # pragma: no cover - via mc_shapley
    """Gram of the gated rows, symmetrized, then the permutation sweep."""
    G = np.dot(X, X.T)
    m = G.shape[0]
    A = np.empty((m, m))
    for i in range(m):
        A[i, i] = 1.0 + eta * G[i, i]
        for j in range(i):
            v = eta * 0.5 * (G[i, j] + G[j, i])
            A[i, j] = v
            A[j, i] = v
    return _permutation_marginals(A, seed, n_perms)


def mc_shapley(
    features: GatedFeatures,
    cfg: Optional[CreditConfig] = None,
    kernel: Optional[Kernel] = None,
) -> CreditReport:
    """Unbiased permutation estimator of the Shapley credits.

    Samples K uniform permutations of P, one independent splitmix64
    stream per permutation index, so results are a deterministic function
    of (inputs, seed, K) regardless of any parallel schedule. Marginals
    along each permutation come from incremental Cholesky extension and
    telescope to v(P); a final rescale pins sum(credits) = v(P) in
    floating point as well.
    """
    cfg = cfg or CreditConfig()
    pos = np.flatnonzero(features.rewards > 0)
    m = pos.size
    if m == 0:
        return CreditReport(
            credits=np.zeros(features.size), method_used="monte_carlo", team_value_total=0.0
        )

    n_perms = cfg.permutations or required_permutations(m, cfg.eta, cfg.epsilon, cfg.delta)
    seed = np.uint64(cfg.seed & 0xFFFFFFFFFFFFFFFF)
    if kernel is None:
        X = features.matrix if m == features.size else features.matrix[pos]
        raw, v_total, status = _mc_core(X, cfg.eta, seed, n_perms)
    else:
        A = np.eye(m) + cfg.eta * kernel.matrix[np.ix_(pos, pos)]
        raw, v_total, status = _permutation_marginals(A, seed, n_perms)
    if status != 0:
        raise SchurNotPositive("non-positive Schur complement in permutation sweep")

    # rescale so the estimates sum to v(P); the n_perms averaging cancels
    total = math.fsum(raw)
    raw *= (v_total / total) if total > 0 else (1.0 / n_perms)
    if m == features.size:
        credits = raw
        max_r = float(np.max(features.rewards))
    else:
        credits = np.zeros(features.size)
        credits[pos] = raw
        max_r = float(np.max(features.rewards[pos]))
    return CreditReport(
        credits=credits,
        method_used="monte_carlo",
        team_value_total=float(v_total),
        permutations_used=int(n_perms),
        error_bound=hoeffding_error_bound(m, cfg.eta, n_perms, cfg.delta, max_r),
    )


def compute_credits(
    features: GatedFeatures,
    cfg: Optional[CreditConfig] = None,
    kernel: Optional[Kernel] = None,
) -> CreditReport:
    """Dispatch on cfg.mode; "auto" means exact below the cutoff, MC above."""
    cfg = cfg or CreditConfig()
    mode = cfg.mode
    if mode == "auto":
        m = int(np.count_nonzero(features.rewards > 0))
        mode = "exact" if m <= cfg.exact_cutoff else "monte_carlo"
        cfg = replace(cfg, mode=mode)
    if mode == "exact":
        return exact_shapley(features, cfg, kernel)
    if mode == "loo":
        return loo_credits(features, cfg, kernel)
    return mc_shapley(features, cfg, kernel)
