"""DBSCAN pseudo-labelling over cosine distance."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .embedding import as_matrix, l2_normalize
from .errors import DegenerateInputError, InvariantError

NOISE = -1


@dataclass
class ClusterState:
    labels: np.ndarray  # int[N], NOISE for unclustered samples
    n_clusters: int
    centroids: np.ndarray  # (C, d), unit rows

    @property
    def n_noise(self) -> int:
        return int(np.sum(self.labels == NOISE))

    def members(self, cluster_id: int) -> np.ndarray:
        return np.flatnonzero(self.labels == cluster_id)


def cosine_neighbors(table, eps: float) -> np.ndarray:
    """Boolean (N, N) matrix of pairs with cosine distance ``<= eps``."""
    x = l2_normalize(as_matrix(table))
    dist = 1.0 - x @ x.T
    return dist <= eps


def dbscan_labels(table, eps: float, min_points: int) -> np.ndarray:
    """DBSCAN labels with deterministic numbering.

    Clusters are numbered in order of their lowest-id core point. A border
    point joins the cluster of its lowest-id core neighbour.
    """
    if eps <= 0:
        raise DegenerateInputError(f"eps must be positive, got {eps}")
    if min_points < 1:
        raise DegenerateInputError(f"min_points must be >= 1, got {min_points}")
    x = as_matrix(table)
    n = x.shape[0]
    if n == 0:
        raise DegenerateInputError("cannot cluster an empty table")

    adj = cosine_neighbors(x, eps)
    np.fill_diagonal(adj, True)
    core = adj.sum(axis=1) >= min_points
    labels = np.full(n, NOISE, dtype=np.int64)
    core_ids = np.flatnonzero(core)
    if core_ids.size == 0:
        return labels

    core_adj = csr_matrix(adj[np.ix_(core_ids, core_ids)])
    _, comp = connected_components(core_adj, directed=False)
    # renumber components by first appearance; core_ids is ascending
    _, first = np.unique(comp, return_index=True)
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    labels[core_ids] = rank[comp]

    border = np.flatnonzero(~core & adj[:, core].any(axis=1))
    if border.size:
        # argmax returns the first True, i.e. the lowest-id core neighbour
        nearest_core = core_ids[np.argmax(adj[np.ix_(border, core_ids)], axis=1)]
        labels[border] = labels[nearest_core]
    return labels


def compute_centroids(table, labels, n_clusters: int | None = None) -> np.ndarray:
    """Per-cluster mean of the member rows, l2-normalized."""
    x = as_matrix(table)
    labels = np.asarray(labels)
    valid = labels != NOISE
    if not np.any(valid):
        raise DegenerateInputError("no clustered samples to average")
    if n_clusters is None:
        n_clusters = int(labels[valid].max()) + 1
    sums = np.zeros((n_clusters, x.shape[1]))
    np.add.at(sums, labels[valid], x[valid])
    counts = np.bincount(labels[valid], minlength=n_clusters)
    if np.any(counts == 0):
        raise InvariantError("empty cluster while computing centroids")
    return l2_normalize(sums / counts[:, None])


def dbscan(table, eps: float = 0.4, min_points: int = 4) -> ClusterState:
    labels = dbscan_labels(table, eps, min_points)
    c = int(labels.max()) + 1 if np.any(labels != NOISE) else 0
    if c == 0:
        centroids = np.zeros((0, as_matrix(table).shape[1]))
    else:
        centroids = compute_centroids(table, labels, c)
    return ClusterState(labels=labels, n_clusters=c, centroids=centroids)
