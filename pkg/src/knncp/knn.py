"""Brute-force weighted k-nearest-neighbours regression and accuracy statistics.

Ties in distance are always broken in favour of the smaller row index.
Weights default to normalized inverse distances ``1 / (dist + EPS)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np
from scipy.spatial.distance import cdist

from .data import Dataset
from .errors import ConfigurationError, DataError

EPS = 1e-10
WEIGHTINGS = ("inverse", "uniform")

# query rows x pool rows per chunk in knn_table
_CHUNK_ELEMENTS = 1 << 22


def euclidean_distance(x1, x2) -> float:
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if x1.shape != x2.shape:
        raise DataError(f"dimension mismatch: {x1.shape} vs {x2.shape}")
    return float(np.sqrt(np.sum((x1 - x2) ** 2)))


def pairwise_distances(queries, pool) -> np.ndarray:
    """Euclidean distance matrix; every entry is computed independently of the batch."""
    return cdist(np.atleast_2d(queries), np.atleast_2d(pool))


def smallest_k(D: np.ndarray, k: int) -> np.ndarray:
    """Column indices of the ``k`` smallest entries per row, ties to the smaller index."""
    n_rows, n_cols = D.shape
    if k == n_cols:
        return np.argsort(D, axis=1, kind="stable")
    kth = np.partition(D, k - 1, axis=1)[:, k - 1 : k]
    rows, cols = np.nonzero(D <= kth)
    order = np.lexsort((cols, D[rows, cols], rows))
    rows, cols = rows[order], cols[order]
    start = np.concatenate(([0], np.cumsum(np.bincount(rows, minlength=n_rows))[:-1]))
    take = start[:, None] + np.arange(k)
    return cols[take]


def neighbour_weights(distances, weighting: str = "inverse") -> np.ndarray:
    """Normalized neighbour weights along the last axis of ``distances``."""
    distances = np.asarray(distances, dtype=float)
    if weighting == "inverse":
        raw = 1.0 / (distances + EPS)
    elif weighting == "uniform":
        raw = np.ones_like(distances)
    else:
        raise ConfigurationError(f"unknown weighting {weighting!r}; choose from {WEIGHTINGS}")
    return raw / raw.sum(axis=-1, keepdims=True)


def weighted_mean(weights, labels) -> np.ndarray:
    """Weighted average along the last axis, exact when all labels are equal."""
    labels = np.asarray(labels, dtype=float)
    base = labels[..., :1]
    return base[..., 0] + np.sum(weights * (labels - base), axis=-1)


@dataclass(frozen=True, eq=False)
class NeighbourSet:
    indices: np.ndarray
    distances: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class AccuracyStats:
    d_k: float
    lambda_k: float
    s_k: float
    xi_k: float


def _pool_attributes(pool) -> np.ndarray:
    return pool.attributes if isinstance(pool, Dataset) else np.atleast_2d(np.asarray(pool, dtype=float))


def find_k_nearest(
    query,
    pool,
    k: int,
    exclude: Iterable[int] | None = None,
    weighting: str = "inverse",
    distance: Callable | None = None,
) -> NeighbourSet:
    """The ``k`` pool rows closest to ``query``, skipping rows in ``exclude``.

    ``pool`` is a :class:`Dataset` or an attribute matrix. ``distance`` may
    replace the Euclidean metric with any callable ``(x1, x2) -> float``.
    """
    X = _pool_attributes(pool)
    query = np.asarray(query, dtype=float)
    if distance is None:
        if query.shape != X.shape[1:]:
            raise DataError(f"query has shape {query.shape}, pool rows have {X.shape[1:]}")
        dist = pairwise_distances(query, X)[0]
    else:
        dist = np.array([distance(query, row) for row in X], dtype=float)
    candidates = np.arange(len(X))
    if exclude is not None:
        mask = np.ones(len(X), dtype=bool)
        mask[[i for i in exclude if 0 <= i < len(X)]] = False
        candidates = candidates[mask]
    if not 1 <= k <= len(candidates):
        raise ConfigurationError(f"k={k} but only {len(candidates)} candidate neighbours")
    order = candidates[np.argsort(dist[candidates], kind="stable")[:k]]
    nd = dist[order]
    return NeighbourSet(order, nd, neighbour_weights(nd, weighting))


def knn_predict(neighbours: NeighbourSet, labels) -> float:
    labels = np.asarray(labels, dtype=float)
    return float(weighted_mean(neighbours.weights, labels[neighbours.indices]))


def knn_table(queries, pool, k: int, exclude_self: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Batch neighbour search: ``(indices, distances)`` of shape ``(n_queries, k)``.

    With ``exclude_self`` the queries must be the pool itself and row ``i``
    never counts as its own neighbour (leave-one-out).
    """
    Q = np.atleast_2d(np.asarray(queries, dtype=float))
    X = _pool_attributes(pool)
    n_pool = X.shape[0] - (1 if exclude_self else 0)
    if not 1 <= k <= n_pool:
        raise ConfigurationError(f"k={k} but only {n_pool} candidate neighbours")
    if exclude_self and Q.shape[0] != X.shape[0]:
        raise DataError("exclude_self requires the queries to be the pool rows")
    idx = np.empty((Q.shape[0], k), dtype=np.intp)
    dst = np.empty((Q.shape[0], k))
    chunk = max(1, _CHUNK_ELEMENTS // X.shape[0])
    for start in range(0, Q.shape[0], chunk):
        stop = min(start + chunk, Q.shape[0])
        D = pairwise_distances(Q[start:stop], X)
        if exclude_self:
            rows = np.arange(stop - start)
            D[rows, rows + start] = np.inf
        order = smallest_k(D, k)
        idx[start:stop] = order
        dst[start:stop] = np.take_along_axis(D, order, axis=1)
    return idx, dst


def floor_median(value: float) -> float:
    """Replace a zero median by ``EPS`` so normalized statistics stay finite."""
    return value if value > 0 else EPS


def accuracy_stats(
    query,
    pool: Dataset,
    k: int,
    median_d: float,
    median_s: float,
    exclude: Iterable[int] | None = None,
) -> AccuracyStats:
    """Distance and label-dispersion difficulty of ``query`` relative to ``pool``.

    ``query`` is an attribute vector or an integer row of ``pool``; in the
    latter case that row is excluded from its own neighbourhood.
    """
    if isinstance(query, (int, np.integer)):
        exclude = {int(query)} | set(exclude or ())
        query = pool.attributes[int(query)]
    nb = find_k_nearest(query, pool, k, exclude=exclude)
    d_k = float(nb.distances.sum())
    s_k = float(np.std(pool.labels[nb.indices]))
    return AccuracyStats(d_k, d_k / floor_median(median_d), s_k, s_k / floor_median(median_s))


def training_medians(pool: Dataset, k: int) -> tuple[float, float]:
    """Leave-one-out medians of neighbour-distance sums and neighbour-label SDs."""
    if len(pool) < k + 1:
        raise ConfigurationError(f"need at least k+1={k + 1} rows, got {len(pool)}")
    idx, dist = knn_table(pool.attributes, pool, k, exclude_self=True)
    d = dist.sum(axis=1)
    s = pool.labels[idx].std(axis=1)
    return float(np.median(d)), float(np.median(s))
