import math

import numpy as np
import pytest

from gcpo import (
    CholeskyState,
    CreditConfig,
    GroupTooLarge,
    InvalidParams,
    SchurNotPositive,
    build_gated_features,
    build_kernel,
    cholesky_extend,
    compute_credits,
    exact_shapley,
    loo_credits,
    mc_shapley,
    required_permutations,
)
from conftest import (
    MIXED_CREDITS,
    duplicate_features,
    make_group,
    oracle_shapley,
    oracle_team_value,
    orthogonal_features,
)


class TestExactShapley:
    def test_duplicates_split_the_value(self):
        report = exact_shapley(duplicate_features(3))
        np.testing.assert_allclose(report.credits, math.log(4.0) / 3, atol=1e-12)

    def test_orthogonal_pair(self):
        report = exact_shapley(orthogonal_features(2))
        np.testing.assert_allclose(report.credits, math.log(2.0), atol=1e-12)

    def test_mixed_group(self, mixed_group):
        report = exact_shapley(build_gated_features(mixed_group))
        np.testing.assert_allclose(report.credits, MIXED_CREDITS, atol=1e-12)
        np.testing.assert_allclose(math.fsum(report.credits), math.log(6.0), atol=1e-12)
        np.testing.assert_allclose(report.team_value_total, math.log(6.0), atol=1e-12)

    def test_matches_bruteforce_oracle(self):
        rng = np.random.default_rng(20)
        for _ in range(10):
            group = make_group(rng, 6, 4, reward_kind="uniform")
            feats = build_gated_features(group)
            report = exact_shapley(feats)
            np.testing.assert_allclose(report.credits, oracle_shapley(feats, 1.0), atol=1e-9)

    def test_null_player_exact_zero(self):
        rng = np.random.default_rng(21)
        group = make_group(rng, 8, 4)
        feats = build_gated_features(group)
        report = exact_shapley(feats)
        for i, r in enumerate(feats.rewards):
            if r == 0:
                assert report.credits[i] == 0.0

    def test_symmetry_under_reordering(self):
        rng = np.random.default_rng(22)
        group = make_group(rng, 6, 3, reward_kind="uniform")
        feats = build_gated_features(group)
        perm = rng.permutation(6)
        permuted = build_gated_features(
            type(group)(group_id="p", rollouts=[group.rollouts[j] for j in perm])
        )
        base = exact_shapley(feats).credits
        np.testing.assert_allclose(exact_shapley(permuted).credits, base[perm], atol=1e-12)

    def test_group_too_large(self):
        rng = np.random.default_rng(23)
        feats = build_gated_features(make_group(rng, 14, 4, reward_kind="uniform"))
        with pytest.raises(GroupTooLarge):
            exact_shapley(feats, CreditConfig(mode="exact", exact_cutoff=12))


class TestLooCredits:
    def test_duplicates(self):
        report = loo_credits(duplicate_features(3))
        np.testing.assert_allclose(report.credits, math.log(4.0 / 3.0), atol=1e-12)

    def test_single_player(self):
        report = loo_credits(duplicate_features(1))
        np.testing.assert_allclose(report.credits, math.log(2.0), atol=1e-12)

    def test_orthogonal_pair(self):
        report = loo_credits(orthogonal_features(2))
        np.testing.assert_allclose(report.credits, math.log(2.0), atol=1e-12)

    def test_shapley_dominates_loo_on_duplicates(self):
        for m in range(2, 7):
            for eta in (0.5, 1.0, 1.5):
                cfg = CreditConfig(eta=eta)
                feats = duplicate_features(m)
                shap = exact_shapley(feats, cfg).credits
                loo = loo_credits(feats, cfg).credits
                assert np.all(shap >= loo - 1e-12)


class TestMcShapley:
    def test_single_player_any_k(self):
        for k in (1, 7):
            report = mc_shapley(duplicate_features(1), CreditConfig(permutations=k))
            np.testing.assert_allclose(report.credits, math.log(2.0), atol=1e-12)

    def test_close_to_exact_at_large_k(self):
        feats = duplicate_features(3)
        cfg = CreditConfig(permutations=2000, seed=7)
        report = mc_shapley(feats, cfg)
        np.testing.assert_allclose(report.credits, math.log(4.0) / 3, atol=0.05)

    def test_telescoping_sum_any_k(self):
        rng = np.random.default_rng(24)
        for k in (1, 3, 50):
            group = make_group(rng, 7, 5, reward_kind="uniform")
            feats = build_gated_features(group)
            report = mc_shapley(feats, CreditConfig(permutations=k, seed=1))
            pos = feats.positive_indices()
            v = oracle_team_value(feats.matrix, list(pos), 1.0)
            np.testing.assert_allclose(math.fsum(report.credits), v, atol=1e-9)

    def test_deterministic_for_fixed_seed(self):
        rng = np.random.default_rng(25)
        feats = build_gated_features(make_group(rng, 8, 6, reward_kind="uniform"))
        cfg = CreditConfig(permutations=64, seed=42)
        a = mc_shapley(feats, cfg)
        b = mc_shapley(feats, cfg)
        np.testing.assert_array_equal(a.credits, b.credits)
        assert mc_shapley(feats, CreditConfig(permutations=64, seed=43)).credits[0] != a.credits[0]

    def test_null_player_and_range(self):
        rng = np.random.default_rng(26)
        feats = build_gated_features(make_group(rng, 8, 4))
        report = mc_shapley(feats, CreditConfig(permutations=100, seed=0))
        for i, r in enumerate(feats.rewards):
            if r == 0:
                assert report.credits[i] == 0.0
            else:
                assert -1e-12 <= report.credits[i] <= math.log(2.0) + 1e-9

    def test_seed_averaged_bias_is_small(self):
        rng = np.random.default_rng(27)
        feats = build_gated_features(make_group(rng, 6, 4, reward_kind="uniform"))
        exact = exact_shapley(feats).credits
        est = np.zeros_like(exact)
        seeds = 200
        for s in range(seeds):
            est += mc_shapley(feats, CreditConfig(permutations=8, seed=s)).credits
        assert np.max(np.abs(est / seeds - exact)) <= 0.01

    def test_explicit_kernel_matches_default_path(self):
        rng = np.random.default_rng(28)
        feats = build_gated_features(make_group(rng, 6, 4, reward_kind="uniform"))
        cfg = CreditConfig(permutations=500, seed=0)
        via_kernel = mc_shapley(feats, cfg, kernel=build_kernel(feats))
        np.testing.assert_allclose(via_kernel.credits, mc_shapley(feats, cfg).credits, atol=1e-9)

    def test_report_diagnostics(self):
        report = mc_shapley(duplicate_features(2), CreditConfig(permutations=10, seed=0))
        assert report.method_used == "monte_carlo"
        assert report.permutations_used == 10
        assert report.error_bound > 0


class TestCholeskyExtend:
    def test_first_extension(self):
        state, marginal = cholesky_extend(CholeskyState.empty(), np.array([]), 2.0, 1.0)
        np.testing.assert_allclose(marginal, math.log(2.0), atol=1e-12)
        np.testing.assert_allclose(state.factor, [[math.sqrt(2.0)]], atol=1e-12)

    def test_duplicate_extension(self):
        state, _ = cholesky_extend(CholeskyState.empty(), np.array([]), 2.0, 1.0)
        _, marginal = cholesky_extend(state, np.array([1.0]), 2.0, 1.0)
        np.testing.assert_allclose(marginal, math.log(1.5), atol=1e-12)

    def test_zero_reward_extension(self):
        state, _ = cholesky_extend(CholeskyState.empty(), np.array([]), 2.0, 1.0)
        new, marginal = cholesky_extend(state, np.array([0.0]), 1.0, 1.0)
        assert marginal == 0.0
        np.testing.assert_allclose(new.factor[1, 1], 1.0, atol=1e-12)

    def test_chain_matches_direct_recomputation(self):
        rng = np.random.default_rng(29)
        feats = build_gated_features(make_group(rng, 8, 5, reward_kind="uniform"))
        L = build_kernel(feats).matrix
        order = rng.permutation(8)
        state = CholeskyState.empty()
        prefix = []
        for i in order:
            state, marginal = cholesky_extend(state, L[prefix, i], 1.0 + L[i, i], 1.0)
            prefix.append(i)
            direct = oracle_team_value(feats.matrix, prefix, 1.0) - oracle_team_value(
                feats.matrix, prefix[:-1], 1.0
            )
            np.testing.assert_allclose(marginal, direct, atol=1e-8)
        # the factor reconstructs I + L restricted to the visited order
        sub = np.eye(8) + L[np.ix_(prefix, prefix)]
        np.testing.assert_allclose(state.factor @ state.factor.T, sub, atol=1e-10)

    def test_wrong_column_length(self):
        state, _ = cholesky_extend(CholeskyState.empty(), np.array([]), 2.0, 1.0)
        with pytest.raises(InvalidParams):
            cholesky_extend(state, np.array([1.0, 2.0]), 2.0, 1.0)

    def test_schur_not_positive(self):
        state, _ = cholesky_extend(CholeskyState.empty(), np.array([]), 1.0, 1.0)
        with pytest.raises(SchurNotPositive):
            cholesky_extend(state, np.array([5.0]), 1.0, 1.0)


class TestRequiredPermutations:
    def test_reference_value(self):
        assert required_permutations(10, 1.0, 0.05, 0.05) == 576

    def test_tiny_eta_clamps_to_one(self):
        assert required_permutations(10, 1e-12, 0.05, 0.05) == 1

    def test_quarter_scaling_in_epsilon(self):
        k1 = required_permutations(10, 1.0, 0.05, 0.05)
        k2 = required_permutations(10, 1.0, 0.10, 0.05)
        assert abs(k1 - 4 * k2) <= 4

    def test_monotone_in_m(self):
        ks = [required_permutations(m, 1.0, 0.05, 0.05) for m in (2, 10, 100)]
        assert ks == sorted(ks)

    def test_invalid_args(self):
        with pytest.raises(InvalidParams):
            required_permutations(0, 1.0, 0.05, 0.05)
        with pytest.raises(InvalidParams):
            required_permutations(10, 1.0, 0.0, 0.05)
        with pytest.raises(InvalidParams):
            required_permutations(10, 1.0, 0.05, 1.5)


class TestComputeCredits:
    def test_auto_uses_exact_below_cutoff(self):
        report = compute_credits(duplicate_features(3))
        assert report.method_used == "exact"

    def test_auto_uses_mc_above_cutoff(self):
        rng = np.random.default_rng(30)
        feats = build_gated_features(make_group(rng, 14, 5, reward_kind="uniform"))
        report = compute_credits(feats, CreditConfig(permutations=50))
        assert report.method_used == "monte_carlo"

    def test_loo_dispatch(self):
        report = compute_credits(duplicate_features(2), CreditConfig(mode="loo"))
        assert report.method_used == "loo"

    def test_invalid_mode(self):
        with pytest.raises(InvalidParams):
            CreditConfig(mode="fast")

    def test_all_wrong_group(self):
        rng = np.random.default_rng(31)
        group = make_group(rng, 4, 3)
        feats = build_gated_features(group)
        feats = type(feats)(matrix=np.zeros_like(feats.matrix), rewards=np.zeros(4))
        for mode in ("exact", "loo", "monte_carlo"):
            report = compute_credits(feats, CreditConfig(mode=mode))
            np.testing.assert_array_equal(report.credits, 0.0)
            assert report.team_value_total == 0.0
