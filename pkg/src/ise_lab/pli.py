"""Progressive linear interpolation: support samples between neighbouring clusters."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .embedding import as_matrix, l2_normalize
from .errors import ConfigError, DegenerateInputError

log = logging.getLogger(__name__)


class ScheduleKind(str, Enum):
    CONSTANT = "CONSTANT"
    LINEAR = "LINEAR"
    SQUARE = "SQUARE"
    LOGARITHM = "LOGARITHM"


class DirectionKind(str, Enum):
    NEAREST = "NEAREST"
    RANDOM = "RANDOM"
    FARTHEST = "FARTHEST"


@dataclass(frozen=True)
class DegreeSchedule:
    kind: ScheduleKind = ScheduleKind.LOGARITHM
    lambda0: float = 1.0
    total_iters: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", ScheduleKind(self.kind))
        if self.lambda0 < 0:
            raise ConfigError(f"lambda0 must be non-negative, got {self.lambda0}")
        if self.total_iters < 1:
            raise ConfigError(f"total iteration count must be positive, got {self.total_iters}")

    def __call__(self, t: float) -> float:
        return degree(self, t)


def degree(schedule: DegreeSchedule, t: float) -> float:
    """Interpolation degree at iteration ``t`` of ``schedule.total_iters``.

    All kinds rise from 0 (except CONSTANT) to ``lambda0 / 2`` at ``t = T``.
    """
    T = schedule.total_iters
    if t < 0:
        raise DegenerateInputError(f"iteration must be non-negative, got {t}")
    if t > T:
        log.warning("iteration %s beyond schedule length %s; clamping", t, T)
        t = T
    half = schedule.lambda0 / 2.0
    kind = schedule.kind
    if kind is ScheduleKind.CONSTANT:
        return half
    if kind is ScheduleKind.LINEAR:
        return half * t / T
    if kind is ScheduleKind.SQUARE:
        return half * t * t / (T * T)
    return half * math.log((math.e - 1.0) / T * t + 1.0)


@dataclass
class SupportSample:
    vector: np.ndarray
    source_id: int
    source_cluster: int
    target_cluster: int
    lambda_used: float


def select_directions(
    f,
    entries: np.ndarray,
    own_cluster: int,
    k: int = 1,
    kind: DirectionKind | str = DirectionKind.NEAREST,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Target cluster ids for one sample, excluding its own cluster."""
    return select_directions_batch(as_matrix(f), entries, np.array([own_cluster]), k, kind, rng)[0]


def select_directions_batch(
    feats: np.ndarray,
    entries: np.ndarray,
    own_clusters: np.ndarray,
    k: int = 1,
    kind: DirectionKind | str = DirectionKind.NEAREST,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """(B, k) target cluster ids for each row of ``feats``.

    NEAREST lists the most similar memory entries first, FARTHEST the least
    similar; equal similarities resolve to the lower cluster id. RANDOM draws
    without replacement, one row at a time in the given order.
    """
    kind = DirectionKind(kind)
    n_clusters = entries.shape[0]
    if k < 1 or n_clusters <= k:
        raise ConfigError(f"need more than k={k} clusters for direction selection, have {n_clusters}")
    b = feats.shape[0]
    own_clusters = np.asarray(own_clusters, dtype=np.int64)
    if kind is DirectionKind.RANDOM:
        if rng is None:
            raise ConfigError("RANDOM direction needs a seeded generator")
        out = np.empty((b, k), dtype=np.int64)
        for i in range(b):
            candidates = np.delete(np.arange(n_clusters), own_clusters[i])
            out[i] = rng.choice(candidates, size=k, replace=False)
        return out

    sims = l2_normalize(feats) @ l2_normalize(entries).T
    key = -sims if kind is DirectionKind.NEAREST else sims.copy()
    key[np.arange(b), own_clusters] = np.inf
    # stable sort keeps lower cluster ids first among ties
    return np.argsort(key, axis=1, kind="stable")[:, :k]


def interpolate(f: np.ndarray, own_centroid: np.ndarray, target_centroids: np.ndarray, lam: float) -> np.ndarray:
    """``f + lam * (c_target - c_own) / 2`` for every target row (broadcasts)."""
    return f + lam * 0.5 * (target_centroids - own_centroid)


def generate_support(
    f,
    own_centroid,
    target_centroids,
    lam: float,
    source_id: int = -1,
    source_cluster: int = -1,
    target_clusters=None,
) -> list[SupportSample]:
    if lam < 0:
        raise DegenerateInputError(f"degree must be non-negative, got {lam}")
    f = np.asarray(f, dtype=np.float64)
    targets = as_matrix(target_centroids)
    if target_clusters is None:
        target_clusters = [-1] * targets.shape[0]
    vecs = interpolate(f[None, :], np.asarray(own_centroid, dtype=np.float64)[None, :], targets, lam)
    return [
        SupportSample(vector=v, source_id=source_id, source_cluster=source_cluster,
                      target_cluster=int(tc), lambda_used=lam)
        for v, tc in zip(vecs, target_clusters)
    ]
