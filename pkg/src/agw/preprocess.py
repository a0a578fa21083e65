"""Intra-domain distance matrices and row normalization."""

from __future__ import annotations

import logging

import numpy as np
from scipy.sparse.csgraph import connected_components, csgraph_from_dense, shortest_path
from scipy.spatial.distance import cdist

from .core import as_data_matrix, as_distance_matrix

log = logging.getLogger(__name__)

BASE_METRICS = ("euclidean", "cosine")


def parse_metric(spec: str):
    """Parse ``euclidean``, ``cosine`` or ``knn:<k>[:<base>]``.

    Returns ``(kind, k, base)`` with ``k`` and ``base`` set only for kNN.
    """
    if spec in BASE_METRICS:
        return spec, None, None
    parts = spec.split(":")
    if parts[0] == "knn" and len(parts) in (2, 3):
        try:
            k = int(parts[1])
        except ValueError:
            raise ValueError(f"bad neighbour count in metric {spec!r}") from None
        base = parts[2] if len(parts) == 3 else "euclidean"
        if base not in BASE_METRICS:
            raise ValueError(f"unknown base metric {base!r}")
        return "knn", k, base
    raise ValueError(f"unknown metric {spec!r}")


def pairwise_distances(X, metric: str = "euclidean") -> np.ndarray:
    """Row-to-row distances.

    Cosine distance is ``1 - <x, y> / (|x| |y|)``; a zero row is at distance
    1 from every other row.
    """
    X = as_data_matrix(X)
    if metric == "euclidean":
        D = cdist(X, X)
    elif metric == "cosine":
        norms = np.linalg.norm(X, axis=1)
        zero = norms == 0
        U = X / np.where(zero, 1.0, norms)[:, None]
        D = np.clip(1.0 - U @ U.T, 0.0, 2.0)
        D[zero, :] = 1.0
        D[:, zero] = 1.0
    else:
        raise ValueError(f"unknown metric {metric!r}")
    D = 0.5 * (D + D.T)
    np.fill_diagonal(D, 0.0)
    return as_distance_matrix(D)


def _knn_graph(D, k):
    n = D.shape[0]
    W = np.full((n, n), np.inf)
    # stable argsort: equal distances go to the lower index
    order = np.argsort(D + np.diag(np.full(n, np.inf)), axis=1, kind="stable")[:, :k]
    rows = np.repeat(np.arange(n), k)
    cols = order.ravel()
    W[rows, cols] = D[rows, cols]
    W[cols, rows] = D[rows, cols]
    return csgraph_from_dense(W, null_value=np.inf)


def knn_geodesic(X, k: int, base: str = "euclidean") -> np.ndarray:
    """Shortest-path distances on the symmetrized kNN graph, scaled to max 1.

    Edges join each sample to its ``k`` nearest neighbours (either direction
    suffices) and carry the base distance. While the graph is disconnected,
    ``k`` is doubled, up to ``n - 1``.
    """
    X = as_data_matrix(X)
    n = X.shape[0]
    if n < 2:
        raise ValueError("kNN geodesics need at least two samples")
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < n = {n}, got {k}")
    D = np.array(pairwise_distances(X, base))
    while True:
        graph = _knn_graph(D, k)
        n_comp, _ = connected_components(graph, directed=False)
        if n_comp == 1:
            break
        log.info("kNN graph with k=%d has %d components; doubling k", k, n_comp)
        k = min(2 * k, n - 1)
    G = shortest_path(graph, method="D", directed=False)
    G = 0.5 * (G + G.T)
    np.fill_diagonal(G, 0.0)
    top = G.max()
    if top > 0:
        G = G / top
    return as_distance_matrix(G)


def distance_matrix(X, metric: str = "euclidean") -> np.ndarray:
    """Dispatch on a metric string as accepted by :func:`parse_metric`."""
    kind, k, base = parse_metric(metric)
    if kind == "knn":
        return knn_geodesic(X, k, base)
    return pairwise_distances(X, kind)


def unit_normalize(X) -> np.ndarray:
    """Scale rows to unit L2 norm; zero rows stay zero."""
    X = as_data_matrix(X)
    norms = np.linalg.norm(X, axis=1)
    return as_data_matrix(X / np.where(norms == 0, 1.0, norms)[:, None])
