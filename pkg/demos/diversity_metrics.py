"""Tour of the diversity and evaluation metrics.

pass@k separates policies with equal accuracy but different coverage;
the lexical metrics and the kernel spectrum measure that coverage
directly, on token sequences and on embeddings respectively.
"""

import numpy as np

from gcpo import (
    GatedFeatures,
    build_kernel,
    distinct_n,
    eigenvalue_ratio,
    pass_at_k,
    self_bleu,
    self_rouge_l,
)

# ------------------------------------------------------------------
# Two policies, same pass@1 = 0.25: one concentrates its correct
# samples, one spreads them across problems. pass@k tells them apart.
# ------------------------------------------------------------------
print("pass@k for n=16 samples, c correct:")
print("{:>4} {:>10} {:>10} {:>10}".format("c", "k=1", "k=4", "k=8"))
for c in (1, 4, 8):
    print(
        "{:>4} {:>10.4f} {:>10.4f} {:>10.4f}".format(
            c, pass_at_k(16, c, 1), pass_at_k(16, c, 4), pass_at_k(16, c, 8)
        )
    )

# ------------------------------------------------------------------
# Lexical diversity: a collapsed sampler repeats itself, a diverse one
# does not. self-BLEU near 1 and self-ROUGE-L near 1 mean collapse.
# ------------------------------------------------------------------
collapsed = [["expand", "the", "square", "then", "factor"]] * 4
diverse = [
    ["expand", "the", "square", "then", "factor"],
    ["complete", "the", "square", "directly"],
    ["substitute", "u", "equals", "x", "minus", "one"],
    ["draw", "the", "parabola", "and", "read", "off", "roots"],
]
for name, seqs in (("collapsed", collapsed), ("diverse", diverse)):
    print(
        f"\n{name}: distinct-1 = {distinct_n(seqs, 1):.3f}, "
        f"self-BLEU = {self_bleu(seqs):.3f}, "
        f"self-ROUGE-L = {self_rouge_l(seqs):.3f}"
    )

# ------------------------------------------------------------------
# Embedding-space collapse: the leading-eigenvalue share of the gated
# kernel is 1/G for orthogonal groups and climbs to 1 as the group
# collapses onto one semantic direction.
# ------------------------------------------------------------------
print("\nleading-eigenvalue share as a group of 4 collapses:")
base = np.eye(4)
for t in (0.0, 0.5, 0.9, 1.0):
    # interpolate every embedding toward a common direction
    target = np.ones(4) / 2.0
    Z = (1 - t) * base + t * target
    Z /= np.linalg.norm(Z, axis=1, keepdims=True)
    report = eigenvalue_ratio(build_kernel(GatedFeatures(matrix=Z, rewards=np.ones(4))))
    print(f"  collapse t = {t:.1f}: ratio = {report.leading_ratio:.3f}")
