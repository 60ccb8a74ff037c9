"""Golub-Kahan bidiagonalization started from the right-hand side."""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.sparse.linalg import aslinearoperator

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class GkbFactorization:
    """Result of ``ell`` bidiagonalization steps.

    ``A @ Z == W @ C`` and ``A.T @ W == Z @ C.T`` up to rounding, with
    ``C`` lower bidiagonal of shape ``(steps + 1, steps)``.
    """

    W: np.ndarray
    Z: np.ndarray
    C: np.ndarray
    beta1: float
    steps_completed: int
    breakdown: Optional[int] = None

    @property
    def alphas(self):
        return np.diag(self.C).copy()

    @property
    def betas(self):
        """Subdiagonal (beta_2, ..., beta_{steps+1})."""
        return np.diag(self.C, -1).copy()


def _mgs(v, Q, ncols):
    """Orthogonalize ``v`` against the first ``ncols`` columns of ``Q``.

    Modified Gram-Schmidt, repeated once when more than ~30% of the norm
    cancels.
    """
    for _ in range(2):
        before = np.linalg.norm(v)
        for i in range(ncols):
            v = v - (Q[:, i] @ v) * Q[:, i]
        if np.linalg.norm(v) > 0.7 * before:
            break
    return v


def gkb(A, f, ell, reorth="full", breakdown_tol=None):
    """Run ``ell`` steps of Golub-Kahan bidiagonalization on ``(A, f)``.

    Parameters
    ----------
    A : array_like or LinearOperator
        Only products with ``A`` and ``A.T`` are used.
    f : array_like
        Starting vector; ``w_1 = f / |f|``.
    ell : int
        Number of steps, ``1 <= ell <= N``.
    reorth : {"full", "none"}
        Full reorthogonalization of both bases against all previous vectors.
    breakdown_tol : float, optional
        Stop when ``alpha_j`` or ``beta_{j+1}`` falls below this. Defaults to
        ``N * eps * |A|_F`` for dense ``A``, the same level as the numerical
        rank cutoff; a looser threshold discards informative modes of
        severely ill-conditioned collocation matrices.
    """
    if reorth not in ("full", "none"):
        raise ValueError("reorth must be 'full' or 'none'")
    f = np.asarray(f, dtype=float).ravel()
    N = f.size
    if not 1 <= ell <= N:
        raise ValueError(f"ell must lie in [1, {N}], got {ell}")
    beta1 = float(np.linalg.norm(f))
    if beta1 == 0.0:
        raise ValueError("right-hand side must be nonzero")
    if breakdown_tol is None:
        if isinstance(A, np.ndarray):
            breakdown_tol = N * _EPS * np.linalg.norm(A)
        else:
            breakdown_tol = 0.0
    op = aslinearoperator(A)
    if op.shape != (N, N):
        raise ValueError(f"operator shape {op.shape} does not match f of length {N}")

    W = np.zeros((N, ell + 1))
    Z = np.zeros((N, ell))
    alphas = np.zeros(ell)
    betas = np.zeros(ell)
    W[:, 0] = f / beta1
    full = reorth == "full"
    steps, breakdown = 0, None

    for j in range(ell):
        r = op.rmatvec(W[:, j])
        if j > 0:
            r = r - betas[j - 1] * Z[:, j - 1]
        if full:
            r = _mgs(r, Z, j)
        a = np.linalg.norm(r)
        if a <= breakdown_tol or a == 0.0:
            breakdown = j + 1
            break
        alphas[j] = a
        Z[:, j] = r / a
        p = op.matvec(Z[:, j]) - a * W[:, j]
        if full:
            p = _mgs(p, W, j + 1)
        b = np.linalg.norm(p)
        steps = j + 1
        if b <= breakdown_tol or b == 0.0:
            breakdown = j + 1
            break
        betas[j] = b
        W[:, j + 1] = p / b

    C = np.zeros((steps + 1, steps))
    C[np.arange(steps), np.arange(steps)] = alphas[:steps]
    C[np.arange(1, steps + 1), np.arange(steps)] = betas[:steps]
    return GkbFactorization(
        W=W[:, : steps + 1].copy(),
        Z=Z[:, :steps].copy(),
        C=C,
        beta1=beta1,
        steps_completed=steps,
        breakdown=breakdown,
    )
