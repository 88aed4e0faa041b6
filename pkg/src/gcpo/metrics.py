"""Evaluation metrics over sample sets: pass@k, lexical diversity, spectra.

pass@k uses the unbiased without-replacement estimator in exact rational
arithmetic. The lexical metrics (distinct-n, self-BLEU, self-ROUGE-L)
operate on token sequences; self-BLEU uses add-one smoothing on the
modified n-gram precisions and self-ROUGE-L takes the max LCS F-score
over references. The spectrum report exposes the leading-eigenvalue
share of the group Gram matrix, a collapse indicator.
"""

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import InvalidCounts, NoNgrams, TooFewSequences
from .kernel import Kernel
from .team_value import EIG_TOLERANCE


def pass_at_k(n: int, c: int, k: int) -> float:
    """Probability that at least one of k drawn samples is correct.

    Unbiased estimator 1 - C(n-c, k)/C(n, k) from n samples with c
    correct, evaluated as an exact product of rationals (no factorials,
    no overflow) and converted to float once at the end.
    """
    if not (0 <= c <= n and 1 <= k <= n):
        raise InvalidCounts(f"need 0 <= c <= n and 1 <= k <= n, got n={n}, c={c}, k={k}")
    if c == 0:
        return 0.0
    if n - c < k:
        return 1.0
    miss = Fraction(1)
    for j in range(k):
        miss *= Fraction(n - c - j, n - j)
    return float(1 - miss)


def _ngrams(sequence: Sequence, n: int):
    return [tuple(sequence[i : i + n]) for i in range(len(sequence) - n + 1)]


def distinct_n(sequences: Sequence[Sequence], n: int) -> float:
    """Unique n-grams over total n-grams, pooled across all sequences."""
    if n < 1:
        raise InvalidCounts("n must be >= 1")
    grams = [g for seq in sequences for g in _ngrams(seq, n)]
    if not grams:
        raise NoNgrams(f"no sequence is long enough for {n}-grams")
    return len(set(grams)) / len(grams)


def _bleu(candidate: Sequence, references: Sequence[Sequence], max_n: int) -> float:
    """Smoothed BLEU of one candidate against a reference set.

    Modified n-gram precisions are clipped against the max reference
    count and add-one smoothed in both numerator and denominator; the
    brevity penalty uses the closest reference length.
    """
    log_precisions = 0.0
    for n in range(1, max_n + 1):
        counts = Counter(_ngrams(candidate, n))
        max_ref = Counter()
        for ref in references:
            for gram, cnt in Counter(_ngrams(ref, n)).items():
                if cnt > max_ref[gram]:
                    max_ref[gram] = cnt
        clipped = sum(min(cnt, max_ref[gram]) for gram, cnt in counts.items())
        total = sum(counts.values())
        log_precisions += np.log((clipped + 1) / (total + 1))
    bleu = np.exp(log_precisions / max_n)
    cand_len = len(candidate)
    ref_len = min((len(r) for r in references), key=lambda L: (abs(L - cand_len), L))
    if cand_len < ref_len:
        bleu *= np.exp(1.0 - ref_len / max(cand_len, 1))
    return float(bleu)


def self_bleu(sequences: Sequence[Sequence], max_n: int = 4) -> float:
    """Mean BLEU of each sequence against all others; 1 - score is diversity."""
    if len(sequences) < 2:
        raise TooFewSequences("self-BLEU needs at least two sequences")
    scores = [
        _bleu(seq, [r for j, r in enumerate(sequences) if j != i], max_n)
        for i, seq in enumerate(sequences)
    ]
    return float(np.mean(scores))


def _lcs_length(a: Sequence, b: Sequence) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, 1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l_fscore(candidate: Sequence, reference: Sequence) -> float:
    """LCS F-score between two token sequences."""
    lcs = _lcs_length(candidate, reference)
    if lcs == 0:
        return 0.0
    precision = lcs / len(candidate)
    recall = lcs / len(reference)
    return 2.0 * precision * recall / (precision + recall)


def self_rouge_l(sequences: Sequence[Sequence]) -> float:
    """Mean over sequences of the best LCS F-score against the others."""
    if len(sequences) < 2:
        raise TooFewSequences("self-ROUGE-L needs at least two sequences")
    scores = []
    for i, seq in enumerate(sequences):
        scores.append(max(rouge_l_fscore(seq, ref) for j, ref in enumerate(sequences) if j != i))
    return float(np.mean(scores))


@dataclass(frozen=True)
class SpectrumReport:
    """Descending eigenvalues of the group kernel and the leading share."""

    eigenvalues: np.ndarray
    leading_ratio: float


def eigenvalue_ratio(kernel: Kernel) -> SpectrumReport:
    """Leading eigenvalue over trace of the reward-gated Gram matrix.

    A ratio near 1 means the group collapsed onto one semantic direction;
    1/G is the floor reached by fully orthogonal equal-reward groups.
    """
    lam = np.linalg.eigvalsh(kernel.matrix)[::-1]
    if np.any(lam < -EIG_TOLERANCE):
        raise InvalidCounts(f"kernel is not PSD (min eigenvalue {lam.min():.3e})")
    lam = np.maximum(lam, 0.0)  # rounding noise would push the ratio past 1
    trace = float(np.sum(lam))
    if trace <= 0:
        raise InvalidCounts("kernel has zero trace (no positive-reward rollouts)")
    return SpectrumReport(eigenvalues=lam, leading_ratio=float(lam[0] / trace))
