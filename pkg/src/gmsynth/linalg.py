"""Positive-definite factorization helpers."""

import numpy as np
from scipy import linalg as sla

from gmsynth.errors import FactorizationFailure

# Escalating diagonal jitter tried after a failed factorization.
JITTER_LADDER = (0.0, 1e-8, 1e-6, 1e-4)


def jittered_cholesky(K):
    """Lower Cholesky factor of ``K``, escalating diagonal jitter on failure.

    Returns ``(L, jitter)`` where ``jitter`` is the amount actually added.
    Raises FactorizationFailure when even the largest jitter does not help.
    """
    K = np.asarray(K, dtype=np.float64)
    if not np.all(np.isfinite(K)):
        raise FactorizationFailure("covariance matrix contains non-finite entries")
    eye = np.eye(K.shape[0])
    for jitter in JITTER_LADDER:
        try:
            L = sla.cholesky(K + jitter * eye, lower=True)
            return L, jitter
        except sla.LinAlgError:
            continue
    raise FactorizationFailure(
        f"matrix not positive definite even with jitter up to {JITTER_LADDER[-1]}"
    )


def chol_solve(L, B):
    """Solve ``(L L^T) x = B`` for x given the lower factor."""
    return sla.cho_solve((L, True), B)


def chol_inverse(L):
    """Explicit inverse of ``L L^T`` from its lower factor."""
    return sla.cho_solve((L, True), np.eye(L.shape[0]))


def chol_logdet(L):
    """log-determinant of ``L L^T`` from the factor diagonal."""
    return 2.0 * float(np.sum(np.log(np.diag(L))))
