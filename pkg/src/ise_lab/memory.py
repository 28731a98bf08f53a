"""Cluster-centroid memory bank with momentum updates."""
from __future__ import annotations

from enum import Enum

import numpy as np

from .embedding import as_matrix, l2_normalize
from .errors import DegenerateInputError


class UpdateMode(str, Enum):
    HARDEST = "HARDEST"
    ALL = "ALL"


class MemoryBank:
    """One unit-norm entry per cluster, updated as ``m <- mu*m + (1-mu)*f``.

    Entries are re-normalized after every update.
    """

    def __init__(self, entries, mu: float = 0.2, update_mode: UpdateMode | str = UpdateMode.HARDEST):
        entries = as_matrix(entries)
        if entries.shape[0] < 1:
            raise DegenerateInputError("memory bank needs at least one entry")
        if not 0.0 <= mu <= 1.0:
            raise DegenerateInputError(f"momentum mu must lie in [0, 1], got {mu}")
        self.entries = l2_normalize(entries)
        self.mu = float(mu)
        self.update_mode = UpdateMode(update_mode)

    @classmethod
    def from_centroids(cls, centroids, mu: float = 0.2, update_mode=UpdateMode.HARDEST) -> "MemoryBank":
        c = np.array(centroids, dtype=np.float64, copy=True)
        if c.size == 0:
            raise DegenerateInputError("cannot initialise a memory bank from no centroids")
        return cls(c, mu=mu, update_mode=update_mode)

    def __len__(self) -> int:
        return self.entries.shape[0]

    @property
    def n_clusters(self) -> int:
        return self.entries.shape[0]

    def _check_id(self, cluster_id: int) -> None:
        if not 0 <= cluster_id < len(self):
            raise IndexError(f"cluster id {cluster_id} out of range for {len(self)} entries")

    def momentum_update(self, cluster_id: int, f) -> np.ndarray:
        self._check_id(cluster_id)
        f = l2_normalize(np.asarray(f, dtype=np.float64))
        m = self.mu * self.entries[cluster_id] + (1.0 - self.mu) * f
        self.entries[cluster_id] = l2_normalize(m)
        return self.entries[cluster_id]

    def select_hardest(self, cluster_id: int, members) -> int:
        """Index of the member least similar to entry ``cluster_id``.

        Ties resolve to the first member, so callers pass members in
        ascending sample-id order.
        """
        self._check_id(cluster_id)
        members = as_matrix(members)
        if members.shape[0] == 0:
            raise DegenerateInputError("hardest-sample selection over no members")
        # row-wise reduction: identical rows always give identical sims
        sims = np.sum(l2_normalize(members) * self.entries[cluster_id], axis=1)
        return int(np.argmin(sims))

    def apply_batch(self, vectors: np.ndarray, clusters: np.ndarray) -> int:
        """Apply one minibatch worth of updates and return how many were made.

        ``vectors`` and ``clusters`` must already be in ascending sample-id
        order. HARDEST makes one update per cluster present, ALL one per row;
        either way clusters are visited in ascending id.
        """
        clusters = np.asarray(clusters)
        n_updates = 0
        for c in np.unique(clusters):
            rows = vectors[clusters == c]
            if self.update_mode is UpdateMode.HARDEST:
                self.momentum_update(int(c), rows[self.select_hardest(int(c), rows)])
                n_updates += 1
            else:
                for row in rows:
                    self.momentum_update(int(c), row)
                    n_updates += 1
        return n_updates
