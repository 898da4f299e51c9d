"""Nonparametric CCA from kernel density estimates.

The score matrix S is the row-stochastic view-1 affinity matrix times the
column-stochastic view-2 affinity matrix; N times its (l, m) entry is the
estimated density ratio p(x_l, y_m) / (p(x_l) p(y_m)).  The optimal
projections of the training samples are the top singular vectors of S
scaled by sqrt(N); the leading pair is the constant component (singular
value 1 in the population) and is discarded from outputs.  New points are
projected with the Nystrom extension: a fresh normalized affinity row (or
column) against the training set, pushed through the retained stochastic
matrix and the opposite side's singular vectors.
"""

from __future__ import annotations

import copy
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .affinity import (
    AffinityConfig,
    affinity_rows,
    gaussian_affinity,
    normalize_left_stochastic,
    normalize_right_stochastic,
)
from .linalg import dense_svd, pca_apply, pca_fit, spgemm, truncated_svd

__all__ = [
    "NccaConfig",
    "NccaModel",
    "ConstantComponentWarning",
    "build_score_matrix",
    "ncca_fit",
    "ncca_project_train",
    "ncca_project_x",
    "ncca_project_y",
]

DEFAULT_PCA_FRACTION = 0.2


class ConstantComponentWarning(UserWarning):
    """The leading singular pair looks unlike the expected constant component."""


@dataclass
class NccaConfig:
    """Hyperparameters of a nonparametric CCA fit.

    ``pca_x`` / ``pca_y`` reduce a view before density estimation: an int is
    a target dimension, a float in (0, 1) a fraction of the input dimension,
    True picks the default fraction (0.2), None disables the reduction.
    ``svd`` picks the decomposition backend: "randomized" (sparse, seeded)
    or "dense" (exact; small N oracle).
    """

    L: int = 2
    affinity_x: AffinityConfig = field(default_factory=AffinityConfig)
    affinity_y: AffinityConfig = field(default_factory=AffinityConfig)
    pca_x: bool | int | float | None = None
    pca_y: bool | int | float | None = None
    # Optional cap on score-matrix nonzeros per row (keep the largest m);
    # off by default, where rows carry up to kx*ky entries.
    score_row_cap: int | None = None
    seed: int = 0
    oversample: int = 10
    power_iters: int = 2
    # Tighter than the generic default: the sqrt(N) projection scaling
    # amplifies the SVD residual, and Nystrom consistency rides on it.
    svd_rtol: float = 1e-9
    sigma1_tolerance: float = 0.15
    svd: str = "randomized"
    bidirectional: bool = True


@dataclass
class NccaModel:
    """Trained state: training-side projections plus what Nystrom needs.

    F and G hold sqrt(N) times the left/right singular vectors of the score
    matrix, one column per retained pair including the leading constant one.
    ``Wy`` is the column-stochastic view-2 affinity matrix; ``Wx`` (and the
    view-2 training data) are retained only for bidirectional models.
    """

    train_x: np.ndarray
    pca_x: tuple | None
    Wy: sp.csr_matrix
    sigmas: np.ndarray
    F: np.ndarray
    G: np.ndarray
    config: NccaConfig
    train_y: np.ndarray | None = None
    pca_y: tuple | None = None
    Wx: sp.csr_matrix | None = None
    timings: dict = field(default_factory=dict, repr=False)


def _resolve_pca_dim(spec, input_dim, n):
    if spec is None or spec is False:
        return None
    if spec is True:
        spec = DEFAULT_PCA_FRACTION
    if isinstance(spec, float):
        if not (0.0 < spec < 1.0):
            raise ValueError(f"PCA fraction must be in (0, 1), got {spec}")
        return max(1, min(round(spec * input_dim), min(n, input_dim)))
    d = int(spec)
    if not (1 <= d <= min(n, input_dim)):
        raise ValueError(f"PCA dimension {d} out of range for {n} x {input_dim} data")
    return d


def _reduce_view(data, pca_spec):
    n, dim = data.shape
    d = _resolve_pca_dim(pca_spec, dim, n)
    if d is None or d == dim:
        return data, None
    mean, basis = pca_fit(data, d)
    return pca_apply(mean, basis, data), (mean, basis)


def build_score_matrix(X, Y, config: NccaConfig):
    """Steps 1-3 of the training pipeline on already-reduced coordinates.

    Returns the score matrix S (CSR) and the retained column-stochastic
    view-2 affinity matrix.
    """
    S, _, Wy = _score_parts(
        np.ascontiguousarray(X, dtype=np.float64),
        np.ascontiguousarray(Y, dtype=np.float64),
        config.affinity_x,
        config.affinity_y,
        config.score_row_cap,
    )
    return S, Wy


def _cap_rows(S, cap):
    """Keep only the ``cap`` largest-magnitude entries of each CSR row."""
    if cap < 1:
        raise ValueError(f"score_row_cap must be >= 1, got {cap}")
    indptr = [0]
    indices = []
    data = []
    for i in range(S.shape[0]):
        lo, hi = S.indptr[i], S.indptr[i + 1]
        row_idx = S.indices[lo:hi]
        row_val = S.data[lo:hi]
        if row_idx.size > cap:
            keep = np.sort(np.argsort(-np.abs(row_val), kind="stable")[:cap])
            row_idx, row_val = row_idx[keep], row_val[keep]
        indices.append(row_idx)
        data.append(row_val)
        indptr.append(indptr[-1] + row_idx.size)
    return sp.csr_matrix(
        (np.concatenate(data), np.concatenate(indices), np.asarray(indptr)), shape=S.shape
    )


def _score_parts(X, Y, cfg_x, cfg_y, score_row_cap=None):
    if X.shape[0] != Y.shape[0]:
        raise ValueError(f"views are not aligned: {X.shape[0]} vs {Y.shape[0]} rows")
    Wx = normalize_right_stochastic(gaussian_affinity(X, cfg_x))
    Wy = normalize_left_stochastic(gaussian_affinity(Y, cfg_y))
    S = spgemm(Wx, Wy)
    if score_row_cap is not None:
        S = _cap_rows(S, score_row_cap)
    return S, Wx, Wy


def ncca_fit(X, Y, config: NccaConfig | None = None):
    """Train nonparametric CCA on aligned sample matrices.

    Applies the optional per-view PCA, builds the score matrix, computes its
    top L+1 singular triplets, and retains the sqrt(N)-scaled singular
    vectors as training projections.  Warns (never errors) when the leading
    pair strays from the constant component the population theory predicts:
    singular value far from 1, or a clearly non-constant leading vector.
    """
    if config is None:
        config = NccaConfig()
    X = np.ascontiguousarray(X, dtype=np.float64)
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    if X.ndim != 2 or Y.ndim != 2:
        raise ValueError("views must be 2-D sample matrices")
    if X.shape[0] != Y.shape[0]:
        raise ValueError(f"views are not aligned: {X.shape[0]} vs {Y.shape[0]} rows")
    n = X.shape[0]
    if config.L < 1:
        raise ValueError(f"L must be >= 1, got {config.L}")
    if n < config.L + 2:
        raise ValueError(f"need at least L+2={config.L + 2} samples, got {n}")
    if config.svd not in ("randomized", "dense"):
        raise ValueError(f"unknown svd backend {config.svd!r}")

    t0 = time.perf_counter()
    Xp, pca_x = _reduce_view(X, config.pca_x)
    Yp, pca_y = _reduce_view(Y, config.pca_y)

    # Freeze resolved bandwidths so projection and serialization reuse them.
    config = copy.deepcopy(config)
    config.affinity_x.sigma = config.affinity_x.resolve_sigma(Xp)
    config.affinity_y.sigma = config.affinity_y.resolve_sigma(Yp)

    S, Wx, Wy = _score_parts(Xp, Yp, config.affinity_x, config.affinity_y, config.score_row_cap)
    t1 = time.perf_counter()

    r = config.L + 1
    if config.svd == "dense":
        full = dense_svd(S.toarray())
        U, sigmas, V = full.U[:, :r], full.s[:r].copy(), full.V[:, :r]
    else:
        res = truncated_svd(
            S,
            r,
            seed=config.seed,
            oversample=config.oversample,
            power_iters=config.power_iters,
            rtol=config.svd_rtol,
        )
        U, sigmas, V = res.U, res.s, res.V
    t2 = time.perf_counter()

    if abs(sigmas[0] - 1.0) > config.sigma1_tolerance:
        warnings.warn(
            f"leading singular value {sigmas[0]:.4f} deviates from 1 by more than "
            f"{config.sigma1_tolerance}; density may be undersampled",
            ConstantComponentWarning,
            stacklevel=2,
        )
    u1 = U[:, 0]
    mean_u1 = np.abs(u1.mean())
    cv = u1.std() / mean_u1 if mean_u1 > 0 else np.inf
    if cv > 0.2:
        warnings.warn(
            f"leading left singular vector has coefficient of variation {cv:.3f} > 0.2; "
            "it is far from constant, suggesting a poorly sampled density",
            ConstantComponentWarning,
            stacklevel=2,
        )

    return NccaModel(
        train_x=Xp,
        pca_x=pca_x,
        Wy=Wy,
        sigmas=sigmas,
        F=np.sqrt(n) * U,
        G=np.sqrt(n) * V,
        config=config,
        train_y=Yp if config.bidirectional else None,
        pca_y=pca_y if config.bidirectional else None,
        Wx=Wx if config.bidirectional else None,
        timings={"search_seconds": t1 - t0, "optimize_seconds": t2 - t1},
    )


def ncca_project_train(model: NccaModel):
    """Training projections with the constant component dropped: (F, G), N x L each."""
    return model.F[:, 1:].copy(), model.G[:, 1:].copy()


def _prepare_queries(data, expect_dim, pca_map):
    data = np.asarray(data, dtype=np.float64)
    single = data.ndim == 1
    data = np.atleast_2d(data)
    if data.shape[1] != expect_dim:
        raise ValueError(f"expected {expect_dim} columns, got {data.shape[1]}")
    if pca_map is not None:
        data = pca_apply(pca_map[0], pca_map[1], data)
    return data, single


def ncca_project_x(model: NccaModel, x_new):
    """Nystrom projection of new view-1 samples (vector in, vector out).

    A normalized affinity row of each sample against the training view-1
    points plays the role of a new row of the row-stochastic matrix; pushing
    it through Wy gives a new score row, and scaling its inner products with
    the view-2 singular vectors by 1/sigma extends the view-1 singular
    functions.
    """
    raw_dim = model.pca_x[1].shape[0] if model.pca_x else model.train_x.shape[1]
    queries, single = _prepare_queries(x_new, raw_dim, model.pca_x)
    rows = affinity_rows(queries, model.train_x, model.config.affinity_x)
    # rows @ Wy @ G, associated as rows @ (Wy @ G): one sparse-dense product.
    P = (rows @ (model.Wy @ model.G[:, 1:])) / model.sigmas[1:]
    return P[0] if single else P


def ncca_project_y(model: NccaModel, y_new):
    """Mirror-image Nystrom projection of new view-2 samples.

    Requires a bidirectional model (the default), which retains the
    row-stochastic view-1 matrix and the reduced training view-2 data.  The
    normalized affinity weights of y against the training view-2 points form
    a new column of the column-stochastic matrix; a new score *column* is
    Wx times it, and the view-1 singular vectors extend the view-2 ones.
    """
    if model.Wx is None or model.train_y is None:
        raise ValueError("model was fitted with bidirectional=False; cannot project view 2")
    raw_dim = model.pca_y[1].shape[0] if model.pca_y else model.train_y.shape[1]
    queries, single = _prepare_queries(y_new, raw_dim, model.pca_y)
    cols = affinity_rows(queries, model.train_y, model.config.affinity_y)
    P = (cols @ (model.Wx.T @ model.F[:, 1:])) / model.sigmas[1:]
    return P[0] if single else P
