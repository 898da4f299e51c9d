"""Gaussian affinity construction with kNN truncation and stochastic normalization.

An affinity matrix W over N points has W[i, j] = exp(-|p_i - p_j|^2 / (2 sigma^2))
whenever i is among the k nearest neighbors of j (self always included) and 0
otherwise, so each column of the raw matrix has k or k+1 nonzeros and the
diagonal is 1.  Row- and column-stochastic rescalings of these matrices are
the building blocks of the density-ratio score matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .linalg import NumericalError
from .neighbors import knn_search

__all__ = [
    "AffinityConfig",
    "default_bandwidth",
    "gaussian_affinity",
    "normalize_right_stochastic",
    "normalize_left_stochastic",
    "affinity_row",
    "affinity_rows",
]

DEFAULT_BANDWIDTH_FRACTION = 0.45
DEFAULT_K = 15


@dataclass
class AffinityConfig:
    """Bandwidth and truncation settings for one view.

    ``sigma=None`` means the bandwidth is resolved at fit time as
    ``fraction`` times the mean sample L2 norm.  ``mutual=True`` keeps an
    affinity only when both points appear in each other's neighbor lists
    (symmetrized truncation); the default keeps the one-sided rule.
    """

    sigma: float | None = None
    k: int = DEFAULT_K
    fraction: float = DEFAULT_BANDWIDTH_FRACTION
    mutual: bool = False

    def resolve_sigma(self, points) -> float:
        if self.sigma is not None:
            if not self.sigma > 0:
                raise ValueError(f"bandwidth must be positive, got {self.sigma}")
            return float(self.sigma)
        return default_bandwidth(points, self.fraction)

    def validate(self):
        if self.k < 1:
            raise ValueError(f"neighbor count k must be >= 1, got {self.k}")
        if self.sigma is None and not (0.0 < self.fraction <= 1.0):
            raise ValueError(f"bandwidth fraction must be in (0, 1], got {self.fraction}")


def default_bandwidth(points, fraction=DEFAULT_BANDWIDTH_FRACTION):
    """Bandwidth as a fraction of the mean (uncentered) sample L2 norm."""
    if not (0.0 < fraction <= 1.0):
        raise ValueError(f"bandwidth fraction must be in (0, 1], got {fraction}")
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] < 1:
        raise ValueError("points must be a nonempty 2-D array")
    mean_norm = np.linalg.norm(points, axis=1).mean()
    if mean_norm == 0.0:
        raise ValueError("all-zero dataset: default bandwidth would be 0")
    return float(fraction * mean_norm)


def gaussian_affinity(points, config: AffinityConfig):
    """kNN-truncated Gaussian affinity matrix of one view, as CSR.

    Entry (i, j) is nonzero iff i is within the k nearest neighbors of j or
    i == j.  Setting ``k = N`` yields the dense Gaussian matrix.
    """
    config.validate()
    points = np.ascontiguousarray(points, dtype=np.float64)
    n = points.shape[0]
    if config.k > n:
        raise ValueError(f"k={config.k} exceeds the number of points {n}")
    sigma = config.resolve_sigma(points)

    knn = knn_search(points, points, k=config.k, include_self=True)
    rows = knn.indices.ravel()
    cols = np.repeat(np.arange(n), config.k)
    vals = np.exp(knn.distances.ravel() / (-2.0 * sigma * sigma))

    # Guarantee the diagonal: under duplicate-point ties a point's own index
    # can be squeezed out of its neighbor list.
    has_self = (knn.indices == np.arange(n)[:, None]).any(axis=1)
    missing = np.flatnonzero(~has_self)
    if missing.size:
        rows = np.concatenate([rows, missing])
        cols = np.concatenate([cols, missing])
        vals = np.concatenate([vals, np.ones(missing.size)])

    W = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    if config.mutual:
        pattern = W.copy()
        pattern.data = np.ones_like(pattern.data)
        W = W.multiply(pattern.T).tocsr()
    W.data[W.data < 1e-300] = 0.0
    W.eliminate_zeros()
    W.sort_indices()
    return W


def normalize_right_stochastic(W):
    """Rescale rows of a nonnegative sparse matrix to sum to 1."""
    W = sp.csr_matrix(W, dtype=np.float64)
    row_sums = np.asarray(W.sum(axis=1)).ravel()
    if np.any(row_sums <= 0.0):
        raise ValueError("zero row: right-stochastic normalization undefined")
    out = W.copy()
    out.data = out.data / np.repeat(row_sums, np.diff(out.indptr))
    return out


def normalize_left_stochastic(W):
    """Rescale columns of a nonnegative sparse matrix to sum to 1."""
    W = sp.csr_matrix(W, dtype=np.float64)
    col_sums = np.asarray(W.sum(axis=0)).ravel()
    if np.any(col_sums <= 0.0):
        raise ValueError("zero column: left-stochastic normalization undefined")
    out = W.copy()
    out.data = out.data / col_sums[out.indices]
    return out


def affinity_row(query, train_points, config: AffinityConfig):
    """Normalized Gaussian affinities from one query to its k nearest training points.

    Returns a 1 x N CSR row summing to 1.

    Raises
    ------
    NumericalError
        If every affinity underflows to zero (query too far at this bandwidth).
    """
    query = np.atleast_2d(np.asarray(query, dtype=np.float64))
    return affinity_rows(query, train_points, config)


def affinity_rows(queries, train_points, config: AffinityConfig):
    """Batched :func:`affinity_row`: one normalized sparse row per query."""
    config.validate()
    train_points = np.ascontiguousarray(train_points, dtype=np.float64)
    queries = np.ascontiguousarray(queries, dtype=np.float64)
    n = train_points.shape[0]
    m = queries.shape[0]
    if config.k > n:
        raise ValueError(f"k={config.k} exceeds the number of training points {n}")
    sigma = config.resolve_sigma(train_points)

    W = sp.csr_matrix((m, n), dtype=np.float64)
    if m == 0:
        return W
    knn = knn_search(train_points, queries, k=config.k, include_self=True)
    vals = np.exp(knn.distances / (-2.0 * sigma * sigma))
    sums = vals.sum(axis=1)
    if np.any(sums <= 0.0):
        bad = int(np.flatnonzero(sums <= 0.0)[0])
        raise NumericalError(
            f"affinity row underflow for query {bad}: all weights are zero at sigma={sigma:.4g}"
        )
    vals = vals / sums[:, None]
    indptr = np.arange(0, m * config.k + 1, config.k)
    W = sp.csr_matrix((vals.ravel(), knn.indices.ravel(), indptr), shape=(m, n))
    W.sort_indices()
    return W
