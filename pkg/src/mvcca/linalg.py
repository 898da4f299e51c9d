"""Dense and sparse linear algebra primitives.

Symmetric eigendecomposition, PSD inverse square root, dense SVD, truncated
SVD of sparse matrices via randomized subspace iteration, sparse-sparse
products, and PCA.  Everything is float64; spectral outputs follow a fixed
sign convention (largest-magnitude entry of each left vector is positive) so
results are deterministic and directly comparable across code paths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = [
    "SvdResult",
    "NumericalError",
    "sym_eig",
    "inv_sqrt_psd",
    "dense_svd",
    "truncated_svd",
    "spgemm",
    "pca_fit",
    "pca_apply",
]

# Entries below this magnitude are treated as structural zeros in sparse output.
DROP_TOL = 1e-300


class NumericalError(RuntimeError):
    """Numerical failure: non-convergence, indefiniteness, degenerate spectrum."""


@dataclass
class SvdResult:
    """Singular triplets: ``U @ diag(s) @ V.T`` approximates the input.

    U has shape (rows, r), s is non-increasing and nonnegative with length r,
    V has shape (cols, r).  Columns of U and V are orthonormal.
    """

    U: np.ndarray
    s: np.ndarray
    V: np.ndarray


def _as_dense(M, name="matrix"):
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got ndim={M.ndim}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains non-finite entries")
    return M


def _fix_signs(U, V=None):
    """Flip column signs so the largest-magnitude entry of each U column is positive.

    V's columns, when given, are flipped together with U's.
    """
    flip = np.sign(U[np.argmax(np.abs(U), axis=0), np.arange(U.shape[1])])
    flip[flip == 0] = 1.0
    U = U * flip
    if V is not None:
        V = V * flip
        return U, V
    return U


def sym_eig(M):
    """Eigendecomposition of a symmetric matrix, eigenvalues descending.

    The input is symmetrized as (M + M.T)/2 before factorization.  Returns
    ``(eigenvalues, eigenvectors)`` with orthonormal eigenvector columns and
    the standard sign convention applied.
    """
    M = _as_dense(M)
    if M.shape[0] != M.shape[1]:
        raise ValueError(f"sym_eig requires a square matrix, got {M.shape}")
    w, V = np.linalg.eigh((M + M.T) / 2.0)
    w = w[::-1].copy()
    V = V[:, ::-1]
    return w, _fix_signs(np.ascontiguousarray(V))


def inv_sqrt_psd(M, eigen_floor=None):
    """Inverse square root of a symmetric PSD matrix.

    Computes ``V diag(max(lam, floor))^{-1/2} V.T``.  The floor (default
    ``1e-10 * lam_max``) keeps near-singular directions bounded instead of
    exploding them.

    Raises
    ------
    NumericalError
        If any eigenvalue is below ``-1e-8 * lam_max`` (not PSD), or the
        floored spectrum is not strictly positive.
    """
    w, V = sym_eig(M)
    lam_max = w[0] if w.size else 0.0
    if np.any(w < -1e-8 * max(lam_max, 0.0)):
        raise NumericalError(
            f"matrix is not positive semidefinite (min eigenvalue {w[-1]:.3e})"
        )
    if eigen_floor is None:
        eigen_floor = 1e-10 * lam_max
    w = np.maximum(w, eigen_floor)
    if np.any(w <= 0.0):
        raise NumericalError("floored spectrum is not positive; matrix is zero or floor too small")
    return (V / np.sqrt(w)) @ V.T


def dense_svd(M):
    """Full SVD of a dense matrix as an :class:`SvdResult`.

    All min(rows, cols) triplets are returned, with the sign convention
    applied.  Serves as the exact oracle for :func:`truncated_svd`.
    """
    M = _as_dense(M)
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    U, V = _fix_signs(U, Vt.T)
    return SvdResult(U=U, s=s, V=V)


def _orth(M):
    Q, _ = np.linalg.qr(M)
    return Q


def truncated_svd(A, r, seed=0, oversample=10, power_iters=2, rtol=1e-6, max_iters=500):
    """Top-r singular triplets of a sparse matrix by randomized subspace iteration.

    A Gaussian test matrix (seeded, hence deterministic) probes the range of
    ``A``; ``power_iters`` initial power sweeps sharpen the subspace, after
    which sweeps continue until every returned triplet satisfies
    ``|A v_i - s_i u_i| <= rtol * s_1``.  Each half-sweep re-orthonormalizes,
    so slowly decaying spectra converge without precision loss.

    Raises
    ------
    NumericalError
        If the residual tolerance is not reached within ``max_iters`` sweeps.
    """
    A = sp.csr_matrix(A, dtype=np.float64)
    n_rows, n_cols = A.shape
    if not (1 <= r <= min(n_rows, n_cols)):
        raise ValueError(f"rank r={r} out of range for shape {A.shape}")
    rng = np.random.default_rng(seed)
    width = min(r + int(oversample), n_cols)
    At = A.T.tocsr()

    Q = _orth(A @ rng.standard_normal((n_cols, width)))
    sweeps = 0
    while True:
        B = (At @ Q).T  # width x n_cols, equals Q.T @ A
        Ub, s, Vt = np.linalg.svd(B, full_matrices=False)
        U = Q @ Ub
        # Residual of the top-r triplets decides convergence.
        AV = A @ Vt[:r].T
        resid = np.linalg.norm(AV - U[:, :r] * s[:r], axis=0)
        if np.all(resid <= rtol * max(s[0], np.finfo(np.float64).tiny)):
            break
        if sweeps >= max_iters:
            raise NumericalError(
                f"truncated_svd did not converge in {max_iters} sweeps "
                f"(max residual {resid.max():.3e}, s1 {s[0]:.3e})"
            )
        Q = _orth(At @ Q)
        Q = _orth(A @ Q)
        sweeps += 1

    U, V = _fix_signs(U[:, :r], Vt[:r].T)
    return SvdResult(U=np.ascontiguousarray(U), s=s[:r].copy(), V=np.ascontiguousarray(V))


def spgemm(A, B):
    """Sparse-sparse product returning CSR with sorted, deduplicated columns.

    Entries with magnitude below 1e-300 are dropped as structural zeros.
    """
    A = sp.csr_matrix(A)
    B = sp.csr_matrix(B)
    if A.shape[1] != B.shape[0]:
        raise ValueError(f"dimension mismatch for product: {A.shape} x {B.shape}")
    C = (A @ B).tocsr()
    C.data[np.abs(C.data) < DROP_TOL] = 0.0
    C.eliminate_zeros()
    C.sort_indices()
    return C


def pca_fit(X, d):
    """Fit a rank-d PCA: returns (mean, basis) with orthonormal basis columns.

    The basis holds the top-d right singular vectors of the centered data,
    ordered by decreasing explained variance.
    """
    X = _as_dense(X, "X")
    n, dim = X.shape
    if not (1 <= d <= min(n, dim)):
        raise ValueError(f"PCA dimension d={d} out of range for data {X.shape}")
    mean = X.mean(axis=0)
    _, _, Vt = np.linalg.svd(X - mean, full_matrices=False)
    basis = _fix_signs(Vt[:d].T)
    return mean, np.ascontiguousarray(basis)


def pca_apply(mean, basis, X):
    """Project rows of X onto a fitted PCA basis: ``(X - mean) @ basis``."""
    X = _as_dense(X, "X")
    mean = np.asarray(mean, dtype=np.float64)
    basis = np.asarray(basis, dtype=np.float64)
    if X.shape[1] != basis.shape[0] or mean.shape[-1] != basis.shape[0]:
        raise ValueError(
            f"dimension mismatch: data has {X.shape[1]} columns, basis expects {basis.shape[0]}"
        )
    return (X - mean) @ basis
