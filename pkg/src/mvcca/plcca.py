"""Partially linear CCA: linear in view 1, nonparametric in view 2.

The view-2 side enters only through the conditional expectation of X given
Y, estimated by Nadaraya-Watson kernel regression over the k nearest
training neighbors.  The linear directions come from the top eigenvectors
of the whitened covariance of those conditional means; the view-2 mapping
is the whitened conditional mean rescaled by the inverse square roots of
the eigenvalues, which is the optimal pairing for a fixed linear side.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .affinity import AffinityConfig
from .cca import DEFAULT_RIDGE_SCALE, EIGENVALUE_FLOOR, _validate_views
from .linalg import NumericalError, inv_sqrt_psd, pca_apply, sym_eig
from .ncca import _reduce_view
from .neighbors import knn_search

__all__ = [
    "PlccaModel",
    "nw_regress",
    "plcca_fit",
    "plcca_linear_oracle",
    "plcca_project_x",
    "plcca_project_y",
    "optimal_g",
]

# Scratch elements per query block (bounds weight/gather memory).
_NW_BLOCK_ELEMS = 8_000_000


@dataclass
class PlccaModel:
    """Trained partially linear CCA state.

    ``whitener`` is the ridged inverse square root of the view-1 covariance;
    U and D are the top eigenvectors/eigenvalues of the whitened
    conditional-mean covariance.  ``predictor`` selects how new Y samples
    are mapped to conditional means: "nw" uses kernel regression against the
    retained training pairs, "linear" uses the stored least-squares
    coefficients (the degenerate route, equal to linear CCA).
    """

    mean_x: np.ndarray
    whitener: np.ndarray
    U: np.ndarray
    D: np.ndarray
    xhat_mean: np.ndarray
    ridge: float
    predictor: str = "nw"
    train_X: np.ndarray | None = None
    train_Y: np.ndarray | None = None
    y_affinity: AffinityConfig | None = None
    linear_coef: np.ndarray | None = None
    mean_y: np.ndarray | None = None
    pca_x: tuple | None = None
    pca_y: tuple | None = None
    timings: dict = field(default_factory=dict, repr=False)


def nw_regress(train_Y, train_X, config: AffinityConfig, query_Y, leave_one_out=False):
    """Nadaraya-Watson estimate of E[X | Y = y] at each query row.

    Weights are Gaussian in the squared distance to the k nearest training
    neighbors, computed in a shifted log domain (minimum squared distance
    subtracted before exponentiation) so small bandwidths cannot underflow
    every weight.  Each output row is a convex combination of training X
    rows.

    ``leave_one_out`` excludes each query's own training point and is only
    valid when ``query_Y`` is the training set itself.
    """
    config.validate()
    train_Y = np.ascontiguousarray(train_Y, dtype=np.float64)
    train_X = np.ascontiguousarray(train_X, dtype=np.float64)
    query_Y = np.asarray(query_Y, dtype=np.float64)
    single = query_Y.ndim == 1
    query_Y = np.atleast_2d(query_Y)
    n = train_Y.shape[0]
    if train_X.shape[0] != n:
        raise ValueError("training views are not aligned")
    if query_Y.shape[1] != train_Y.shape[1]:
        raise ValueError(
            f"queries have {query_Y.shape[1]} columns, training Y has {train_Y.shape[1]}"
        )
    k = min(config.k, n - 1 if leave_one_out else n)
    if k < 1:
        raise ValueError("not enough training points for the requested neighborhood")
    sigma = config.resolve_sigma(train_Y)

    out = np.empty((query_Y.shape[0], train_X.shape[1]))
    inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma)
    untruncated = k == n and not leave_one_out
    if untruncated:
        # Dense path: every training point carries weight, so skip the
        # neighbor search and its index storage entirely.
        train_sq = np.einsum("ij,ij->i", train_Y, train_Y)
        block = max(1, _NW_BLOCK_ELEMS // n)
        for start in range(0, query_Y.shape[0], block):
            stop = min(start + block, query_Y.shape[0])
            Q = query_Y[start:stop]
            q_sq = np.einsum("ij,ij->i", Q, Q)
            d2 = np.maximum(q_sq[:, None] + train_sq[None, :] - 2.0 * (Q @ train_Y.T), 0.0)
            w = np.exp((d2.min(axis=1)[:, None] - d2) * inv_two_sigma_sq)
            out[start:stop] = (w @ train_X) / w.sum(axis=1)[:, None]
    else:
        knn = knn_search(train_Y, query_Y, k=k, include_self=not leave_one_out)
        block = max(1, _NW_BLOCK_ELEMS // (k * max(train_X.shape[1], 1)))
        for start in range(0, query_Y.shape[0], block):
            stop = min(start + block, query_Y.shape[0])
            d2 = knn.distances[start:stop]
            w = np.exp((d2.min(axis=1)[:, None] - d2) * inv_two_sigma_sq)
            w /= w.sum(axis=1)[:, None]
            out[start:stop] = np.einsum("qk,qkd->qd", w, train_X[knn.indices[start:stop]])
    return out[0] if single else out


def _fit_from_xhat(X, xhat, L, ridge):
    """Shared tail of the fit routes: whiten, eigendecompose, validate."""
    n, dx = X.shape
    if not (1 <= L <= dx):
        raise ValueError(f"L={L} out of range for view-1 width {dx}")
    mean_x = X.mean(axis=0)
    Xc = X - mean_x
    Sxx = Xc.T @ Xc / n
    if ridge is None:
        ridge = DEFAULT_RIDGE_SCALE * np.trace(Sxx) / dx
    elif ridge < 0:
        raise ValueError(f"ridge must be nonnegative, got {ridge}")
    whitener = inv_sqrt_psd(Sxx + ridge * np.eye(dx))

    xhat_mean = xhat.mean(axis=0)
    Xh = xhat - xhat_mean
    K = whitener @ (Xh.T @ Xh / n) @ whitener
    eigvals, eigvecs = sym_eig(K)
    D = eigvals[:L]
    if np.any(D <= EIGENVALUE_FLOOR):
        raise NumericalError(
            f"conditional-mean covariance is degenerate along a requested direction "
            f"(eigenvalue {D.min():.3e})"
        )
    return mean_x, whitener, eigvecs[:, :L], D, xhat_mean, float(ridge)


def plcca_fit(
    X,
    Y,
    L,
    config: AffinityConfig | None = None,
    ridge=None,
    leave_one_out=False,
    pca_x=None,
    pca_y=None,
):
    """Fit partially linear CCA with a kernel-regression conditional mean.

    The conditional mean at each training point is estimated with the
    point's own pair included (leave-self-in); pass ``leave_one_out=True``
    to exclude it when studying the induced bias.  ``pca_x`` / ``pca_y``
    optionally reduce a view first (int dimension, fraction of the input
    width, or True for the default fraction); the fitted maps are kept on
    the model so projection applies them.
    """
    X, Y = _validate_views(X, Y)
    X, pca_x_map = _reduce_view(X, pca_x)
    Y, pca_y_map = _reduce_view(Y, pca_y)
    if config is None:
        config = AffinityConfig()
    config = AffinityConfig(
        sigma=config.resolve_sigma(Y), k=config.k, fraction=config.fraction, mutual=config.mutual
    )
    t0 = time.perf_counter()
    xhat = nw_regress(Y, X, config, Y, leave_one_out=leave_one_out)
    t1 = time.perf_counter()
    mean_x, whitener, U, D, xhat_mean, ridge = _fit_from_xhat(X, xhat, L, ridge)
    t2 = time.perf_counter()
    return PlccaModel(
        mean_x=mean_x,
        whitener=whitener,
        U=U,
        D=D,
        xhat_mean=xhat_mean,
        ridge=ridge,
        predictor="nw",
        train_X=X,
        train_Y=Y,
        y_affinity=config,
        pca_x=pca_x_map,
        pca_y=pca_y_map,
        timings={"search_seconds": t1 - t0, "optimize_seconds": t2 - t1},
    )


def plcca_linear_oracle(X, Y, L, ridge=None):
    """Fit with the optimal *linear* predictor in place of kernel regression.

    This reduces the method to linear CCA: projections match
    :func:`mvcca.cca.cca_fit` up to per-column sign and D equals the squared
    canonical correlations.
    """
    X, Y = _validate_views(X, Y)
    n, dy = Y.shape
    mean_y = Y.mean(axis=0)
    Yc = Y - mean_y
    Xc = X - X.mean(axis=0)
    Syy = Yc.T @ Yc / n
    Sxy = Xc.T @ Yc / n
    ridge_y = float(DEFAULT_RIDGE_SCALE * np.trace(Syy) / dy) if ridge is None else float(ridge)
    try:
        B = np.linalg.solve(Syy + ridge_y * np.eye(dy), Sxy.T).T
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"singular view-2 covariance: {exc}") from None
    xhat = Yc @ B.T

    # The cross-moment form B Syx (not the second moment of the ridged
    # predictions) is what makes D the exact squared canonical correlations.
    mean_x = X.mean(axis=0)
    dx = X.shape[1]
    if not (1 <= L <= dx):
        raise ValueError(f"L={L} out of range for view-1 width {dx}")
    Sxx = Xc.T @ Xc / n
    ridge_x = float(DEFAULT_RIDGE_SCALE * np.trace(Sxx) / dx) if ridge is None else float(ridge)
    whitener = inv_sqrt_psd(Sxx + ridge_x * np.eye(dx))
    Sxhat = B @ Sxy.T
    K = whitener @ ((Sxhat + Sxhat.T) / 2.0) @ whitener
    eigvals, eigvecs = sym_eig(K)
    D = eigvals[:L]
    if np.any(D <= EIGENVALUE_FLOOR):
        raise NumericalError(
            f"degenerate canonical direction: eigenvalue {D.min():.3e} below {EIGENVALUE_FLOOR}"
        )
    return PlccaModel(
        mean_x=mean_x,
        whitener=whitener,
        U=eigvecs[:, :L],
        D=D,
        xhat_mean=xhat.mean(axis=0),
        ridge=ridge_x,
        predictor="linear",
        linear_coef=B,
        mean_y=mean_y,
    )


def _apply_pca(pca_map, data):
    if pca_map is None:
        return data
    return pca_apply(pca_map[0], pca_map[1], data)


def plcca_project_x(model: PlccaModel, X_new):
    """View-1 projection: center, whiten, rotate onto the top directions."""
    X_new = np.asarray(X_new, dtype=np.float64)
    single = X_new.ndim == 1
    X_new = np.atleast_2d(X_new)
    expect = model.pca_x[1].shape[0] if model.pca_x else model.mean_x.shape[0]
    if X_new.shape[1] != expect:
        raise ValueError(f"expected {expect} columns, got {X_new.shape[1]}")
    X_new = _apply_pca(model.pca_x, X_new)
    P = (X_new - model.mean_x) @ model.whitener @ model.U
    return P[0] if single else P


def plcca_project_y(model: PlccaModel, Y_new):
    """View-2 projection via the conditional mean of X given each new y."""
    Y_new = np.asarray(Y_new, dtype=np.float64)
    single = Y_new.ndim == 1
    Y_new = np.atleast_2d(Y_new)
    if model.predictor == "nw":
        expect = model.pca_y[1].shape[0] if model.pca_y else model.train_Y.shape[1]
        if Y_new.shape[1] != expect:
            raise ValueError(f"expected {expect} columns, got {Y_new.shape[1]}")
        Y_new = _apply_pca(model.pca_y, Y_new)
        xhat = nw_regress(model.train_Y, model.train_X, model.y_affinity, Y_new)
    else:
        if Y_new.shape[1] != model.mean_y.shape[0]:
            raise ValueError(f"expected {model.mean_y.shape[0]} columns, got {Y_new.shape[1]}")
        xhat = (Y_new - model.mean_y) @ model.linear_coef.T
    G = (xhat - model.xhat_mean) @ model.whitener @ model.U / np.sqrt(model.D)
    return G[0] if single else G


def optimal_g(Fhat, eigen_floor=EIGENVALUE_FLOOR):
    """Whiten conditional expectations to unit empirical second moment.

    Given rows holding E[f(X) | Y = y_n], returns ``Fhat @ M^{-1/2}`` where
    M is the empirical second moment ``Fhat.T Fhat / N``; the output is the
    correlation-optimal pairing for the fixed f and satisfies
    ``G.T G / N = I``.

    Raises
    ------
    NumericalError
        If M has an eigenvalue at or below ``eigen_floor``.
    """
    Fhat = np.ascontiguousarray(Fhat, dtype=np.float64)
    if Fhat.ndim != 2 or Fhat.shape[0] < 1:
        raise ValueError("Fhat must be a nonempty 2-D array")
    n = Fhat.shape[0]
    G = Fhat
    # One refinement pass: re-whitening the near-identity residual squares
    # away the conditioning error of the first factorization.
    for _ in range(2):
        M = G.T @ G / n
        eigvals, eigvecs = sym_eig(M)
        if np.any(eigvals <= eigen_floor):
            raise NumericalError(
                f"singular second moment: eigenvalue {eigvals.min():.3e} at or below {eigen_floor}"
            )
        G = G @ ((eigvecs / np.sqrt(eigvals)) @ eigvecs.T)
    return G
