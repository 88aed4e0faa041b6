import itertools
import math

import numpy as np
import pytest

from gcpo import (
    InvalidCounts,
    NoNgrams,
    TooFewSequences,
    build_gated_features,
    build_kernel,
    distinct_n,
    eigenvalue_ratio,
    pass_at_k,
    self_bleu,
    self_rouge_l,
)
from gcpo.metrics import rouge_l_fscore
from conftest import duplicate_features, make_group, orthogonal_features


def pass_at_k_by_enumeration(n, c, k):
    """Fraction of k-subsets of n samples containing at least one correct."""
    hits = sum(
        1 for subset in itertools.combinations(range(n), k) if any(i < c for i in subset)
    )
    return hits / math.comb(n, k)


class TestPassAtK:
    def test_all_correct(self):
        assert pass_at_k(16, 16, 1) == 1.0

    def test_reduces_to_accuracy_at_k1(self):
        assert pass_at_k(16, 4, 1) == 0.25

    def test_small_enumeration(self):
        np.testing.assert_allclose(pass_at_k(4, 2, 2), 5.0 / 6.0, atol=0)

    def test_none_correct(self):
        assert pass_at_k(8, 0, 4) == 0.0

    def test_matches_enumeration_exactly(self):
        for n in range(1, 9):
            for c in range(n + 1):
                for k in range(1, n + 1):
                    assert pass_at_k(n, c, k) == pass_at_k_by_enumeration(n, c, k)

    def test_monotone_in_k_and_c(self):
        n = 10
        for c in range(n + 1):
            vals = [pass_at_k(n, c, k) for k in range(1, n + 1)]
            assert vals == sorted(vals)
        for k in (1, 3, 7):
            vals = [pass_at_k(n, c, k) for c in range(n + 1)]
            assert vals == sorted(vals)

    def test_invalid_counts(self):
        with pytest.raises(InvalidCounts):
            pass_at_k(4, 5, 1)
        with pytest.raises(InvalidCounts):
            pass_at_k(4, 2, 0)
        with pytest.raises(InvalidCounts):
            pass_at_k(4, 2, 5)


class TestDistinctN:
    def test_repeated_token(self):
        np.testing.assert_allclose(distinct_n([["a", "a", "a"]], 1), 1.0 / 3.0, atol=0)

    def test_all_distinct(self):
        assert distinct_n([["a", "b", "c"]], 1) == 1.0

    def test_bigrams_across_sequences(self):
        assert distinct_n([["a", "b"], ["b", "c"]], 2) == 1.0

    def test_no_ngrams(self):
        with pytest.raises(NoNgrams):
            distinct_n([["a"]], 2)


class TestSelfBleu:
    def test_identical_pair(self):
        seqs = [["a", "b", "c", "d"]] * 2
        np.testing.assert_allclose(self_bleu(seqs), 1.0, atol=1e-12)

    def test_disjoint_vocabulary_near_floor(self):
        seqs = [["a", "b", "c", "d", "e"], ["v", "w", "x", "y", "z"]]
        assert self_bleu(seqs) < 0.35
        assert 1.0 - self_bleu(seqs) > 0.65

    def test_single_sequence_rejected(self):
        with pytest.raises(TooFewSequences):
            self_bleu([["a", "b"]])

    def test_permutation_invariance(self):
        seqs = [["a", "b", "c"], ["b", "c", "d"], ["x", "y", "z"]]
        assert self_bleu(seqs) == self_bleu(list(reversed(seqs)))


class TestSelfRougeL:
    def test_identical_pair(self):
        assert self_rouge_l([["a", "b", "c"]] * 2) == 1.0

    def test_half_overlap(self):
        np.testing.assert_allclose(
            rouge_l_fscore(["a", "x", "c", "y"], ["a", "b", "c", "d"]), 0.5, atol=0
        )

    def test_disjoint(self):
        assert self_rouge_l([["a", "b"], ["x", "y"]]) == 0.0

    def test_single_sequence_rejected(self):
        with pytest.raises(TooFewSequences):
            self_rouge_l([["a"]])

    def test_permutation_invariance(self):
        seqs = [["a", "b", "c"], ["a", "c"], ["q", "r", "s"]]
        assert self_rouge_l(seqs) == self_rouge_l(list(reversed(seqs)))


class TestEigenvalueRatio:
    def test_identical_group_collapses(self):
        report = eigenvalue_ratio(build_kernel(duplicate_features(4)))
        np.testing.assert_allclose(report.eigenvalues, [4.0, 0.0, 0.0, 0.0], atol=1e-12)
        assert report.leading_ratio == 1.0

    def test_orthogonal_group(self):
        report = eigenvalue_ratio(build_kernel(orthogonal_features(4)))
        np.testing.assert_allclose(report.eigenvalues, 1.0, atol=1e-12)
        np.testing.assert_allclose(report.leading_ratio, 0.25, atol=1e-12)

    def test_trace_identity_and_range(self):
        rng = np.random.default_rng(50)
        for _ in range(10):
            group = make_group(rng, 6, 4, reward_kind="uniform")
            feats = build_gated_features(group)
            report = eigenvalue_ratio(build_kernel(feats))
            np.testing.assert_allclose(
                report.eigenvalues.sum(), np.sum(feats.rewards**2), atol=1e-10
            )
            assert 1.0 / 6.0 - 1e-12 <= report.leading_ratio <= 1.0 + 1e-12

    def test_zero_trace_rejected(self):
        rng = np.random.default_rng(51)
        group = make_group(rng, 3, 2)
        feats = build_gated_features(group)
        feats = type(feats)(matrix=np.zeros_like(feats.matrix), rewards=np.zeros(3))
        with pytest.raises(InvalidCounts):
            eigenvalue_ratio(build_kernel(feats))
