"""Exception taxonomy shared across the package."""


class GcpoError(Exception):
    """Base class for all errors raised by this package."""


class DegenerateEmbedding(GcpoError):
    """A positive-reward rollout has an embedding with (near-)zero norm."""


class InvalidParams(GcpoError):
    """A kernel or config parameter is outside its valid range."""


class FactorizationFailure(GcpoError):
    """A matrix expected to be positive definite could not be factorized."""


class InvalidEigenvalue(GcpoError):
    """An eigenvalue is more negative than the PSD tolerance allows."""


class GroupTooLarge(GcpoError):
    """Too many positive-reward rollouts for exact Shapley enumeration."""


class SchurNotPositive(FactorizationFailure):
    """The Schur complement in a Cholesky extension is non-positive."""


class DegenerateCredits(GcpoError):
    """Positive-reward rollouts exist but their total credit is ~zero."""


class LengthMismatch(GcpoError):
    """Two vectors that must share a length do not."""


class InvalidCounts(GcpoError):
    """Sample counts for pass@k are inconsistent (need 0 <= c <= n, 1 <= k <= n)."""


class NoNgrams(GcpoError):
    """No sequence is long enough to produce a single n-gram."""


class TooFewSequences(GcpoError):
    """A self-similarity metric needs at least two sequences."""
