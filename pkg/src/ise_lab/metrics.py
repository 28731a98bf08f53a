"""Clustering quality against ground truth, and retrieval mAP / CMC."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np
from sklearn import metrics as skm

from .clustering import NOISE
from .embedding import as_matrix, l2_normalize
from .errors import DegenerateInputError

log = logging.getLogger(__name__)

CMC_RANKS = (1, 5, 10)


@dataclass
class ClusterQuality:
    fowlkes_mallows: float
    adjusted_rand: float
    adjusted_mutual_info: float
    v_measure: float

    def as_dict(self) -> dict:
        return asdict(self)

    def mean(self) -> float:
        return (self.fowlkes_mallows + self.adjusted_rand + self.adjusted_mutual_info + self.v_measure) / 4.0


@dataclass
class RetrievalScores:
    map: float
    cmc: dict  # rank -> hit rate
    n_queries: int

    def as_dict(self) -> dict:
        return {"map": self.map, **{f"cmc{k}": v for k, v in self.cmc.items()}, "n_queries": self.n_queries}


def cluster_quality(pred_labels, true_labels) -> ClusterQuality:
    """The four scikit-learn clustering scores, ignoring NOISE predictions."""
    pred = np.asarray(pred_labels)
    true = np.asarray(true_labels)
    if pred.shape != true.shape:
        raise DegenerateInputError(f"label length mismatch: {pred.shape} vs {true.shape}")
    keep = pred != NOISE
    pred, true = pred[keep], true[keep]
    if pred.size < 2:
        raise DegenerateInputError("fewer than two clustered samples to score")
    return ClusterQuality(
        fowlkes_mallows=float(skm.fowlkes_mallows_score(true, pred)),
        adjusted_rand=float(skm.adjusted_rand_score(true, pred)),
        adjusted_mutual_info=float(skm.adjusted_mutual_info_score(true, pred, average_method="arithmetic")),
        v_measure=float(skm.v_measure_score(true, pred)),
    )


def average_precision(ranked_hits: np.ndarray) -> float:
    """AP of a boolean relevance vector already in rank order."""
    hit_pos = np.flatnonzero(ranked_hits)
    if hit_pos.size == 0:
        return 0.0
    precision_at_hits = np.arange(1, hit_pos.size + 1) / (hit_pos + 1)
    return float(precision_at_hits.mean())


def evaluate_retrieval(query_emb, gallery_emb, query_ids, gallery_ids, ranks=CMC_RANKS) -> RetrievalScores:
    """Rank the gallery by cosine similarity for every query; no re-ranking.

    Queries without any gallery match are dropped with a warning.
    """
    q = l2_normalize(as_matrix(query_emb))
    g = l2_normalize(as_matrix(gallery_emb))
    qids = np.asarray(query_ids)
    gids = np.asarray(gallery_ids)
    sims = q @ g.T
    order = np.argsort(-sims, axis=1, kind="stable")
    matches = gids[order] == qids[:, None]
    has_match = matches.any(axis=1)
    if not np.all(has_match):
        log.warning("%d queries have no gallery match and are excluded", int((~has_match).sum()))
    matches = matches[has_match]
    if matches.shape[0] == 0:
        raise DegenerateInputError("no query has a gallery match")
    aps = [average_precision(row) for row in matches]
    first_hit = np.argmax(matches, axis=1)
    cmc = {int(k): float(np.mean(first_hit < k)) for k in ranks}
    return RetrievalScores(map=float(np.mean(aps)), cmc=cmc, n_queries=int(matches.shape[0]))
