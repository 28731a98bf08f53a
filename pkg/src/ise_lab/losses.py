"""Contrastive losses over cosine similarities, with analytic gradients.

Every gradient here is taken w.r.t. raw (unnormalized) embedding rows.
Memory entries are constants. A support sample ``f + lam * delta`` passes
its gradient straight through to its source row ``f``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .embedding import as_matrix, cosine_grad
from .errors import ConfigError, DegenerateInputError

log = logging.getLogger(__name__)


@dataclass
class LossTerms:
    l_se: float
    l_lp: float
    total: float
    beta: float
    tau1: float
    tau2: float


@dataclass
class GradientBuffer:
    rows: np.ndarray  # sample id per batch position
    grads: np.ndarray  # (B, d), gradient per batch position

    def dense(self, n_rows: int) -> np.ndarray:
        out = np.zeros((n_rows, self.grads.shape[1]))
        np.add.at(out, self.rows, self.grads)
        return out


def _scatter_rows(n: int, idx: np.ndarray, vals: np.ndarray) -> np.ndarray:
    """Sum ``vals`` rows into ``n`` output rows by index (a dense np.add.at)."""
    onehot = np.zeros((n, idx.size))
    onehot[idx, np.arange(idx.size)] = 1.0
    return onehot @ vals


def _check_tau(tau: float) -> None:
    if not tau > 0:
        raise ConfigError(f"temperature must be positive, got {tau}")


def xent_to_entries(feats: np.ndarray, entries: np.ndarray, positives: np.ndarray, tau: float):
    """Per-row ``-log softmax(cos(f, m) / tau)[pos]`` and its gradient w.r.t. ``f``."""
    _check_tau(tau)
    nf = np.linalg.norm(feats, axis=1, keepdims=True)
    if np.any(nf == 0):
        raise DegenerateInputError("zero-norm feature in contrastive loss")
    fh = feats / nf
    mh = entries / np.linalg.norm(entries, axis=1, keepdims=True)
    sims = fh @ mh.T
    logits = sims / tau
    rows = np.arange(feats.shape[0])
    lse = logsumexp(logits, axis=1)
    losses = lse - logits[rows, positives]
    # dL/dsim = (softmax - onehot) / tau
    w = np.exp(logits - lse[:, None])
    w[rows, positives] -= 1.0
    w /= tau
    grads = (w @ mh - np.sum(w * sims, axis=1, keepdims=True) * fh) / nf
    return losses, grads


def loss_info_nce(f, entries, positive_index: int, tau: float) -> float:
    """InfoNCE of one feature against a bank of entries."""
    entries = as_matrix(entries)
    if not 0 <= positive_index < entries.shape[0]:
        raise IndexError(f"positive index {positive_index} out of range")
    losses, _ = xent_to_entries(as_matrix(f), entries, np.array([positive_index]), tau)
    return float(losses[0])


def loss_se(f_hat, entries, own_cluster: int, tau1: float) -> float:
    """Sample-extension loss of one actual or support feature."""
    entries = as_matrix(entries)
    if entries.shape[0] < 2:
        raise DegenerateInputError("sample-extension loss needs at least two clusters")
    return loss_info_nce(f_hat, entries, own_cluster, tau1)


def se_batch(views: list[np.ndarray], entries: np.ndarray, clusters: np.ndarray, tau1: float):
    """Mean sample-extension loss over actual rows and their support views.

    ``views[0]`` holds the actual features and ``views[1:]`` one support
    per row each. Each anchor averages its views first, then anchors are
    averaged, which weights every actual and support sample equally.
    Returns ``(loss, grad)`` with ``grad`` per actual row.
    """
    if entries.shape[0] < 2:
        raise DegenerateInputError("sample-extension loss needs at least two clusters")
    n_views = len(views)
    loss_sum = np.zeros(views[0].shape[0])
    grad_sum = np.zeros_like(views[0])
    for v in views:
        losses, grads = xent_to_entries(v, entries, clusters, tau1)
        loss_sum += losses
        grad_sum += grads
    b = views[0].shape[0]
    return float(np.mean(loss_sum / n_views)), grad_sum / n_views / b


def lp_batch(
    anchors: np.ndarray,
    anchor_clusters: np.ndarray,
    cands: np.ndarray,
    cand_clusters: np.ndarray,
    cand_source: np.ndarray,
    tau2: float,
):
    """Label-preserving loss with batch-hardest positive and negatives.

    For each anchor the positive is the least similar candidate of its own
    cluster and each other cluster contributes its most similar candidate.
    The positive sits in the denominator too, so the loss is ``>= 0``.
    ``cand_source[j]`` is the anchor row that candidate ``j`` came from;
    candidate gradients are routed there. Candidates must be ordered by
    ascending sample id so ties pick the lowest id.

    Anchors with no own-cluster candidate or no other cluster in the batch
    contribute nothing. Returns ``(loss, grad, n_valid)``.
    """
    _check_tau(tau2)
    b, d = anchors.shape
    grad = np.zeros_like(anchors)
    present = np.unique(cand_clusters)
    if present.size < 2:
        log.warning("label-preserving loss skipped: fewer than two clusters in batch")
        return 0.0, grad, 0

    na = np.linalg.norm(anchors, axis=1, keepdims=True)
    nc = np.linalg.norm(cands, axis=1, keepdims=True)
    sims = (anchors / na) @ (cands / nc).T

    # hardest candidate per (anchor, cluster): min for own cluster, max otherwise
    own = anchor_clusters[:, None] == present[None, :]
    pick = np.empty((b, present.size), dtype=np.int64)
    for j, c in enumerate(present):
        col = np.flatnonzero(cand_clusters == c)
        s = sims[:, col]
        pick[:, j] = np.where(own[:, j], col[np.argmin(s, axis=1)], col[np.argmax(s, axis=1)])
    valid = own.any(axis=1)
    n_valid = int(valid.sum())
    if n_valid < b:
        log.warning("label-preserving loss: %d anchors without an own-cluster candidate", b - n_valid)
    if n_valid == 0:
        return 0.0, grad, 0

    chosen = pick[valid]  # (V, |present|)
    a_idx = np.flatnonzero(valid)
    s_chosen = sims[a_idx[:, None], chosen]
    logits = s_chosen / tau2
    pos_col = np.argmax(own[valid], axis=1)
    rows = np.arange(a_idx.size)
    lse = logsumexp(logits, axis=1)
    losses = lse - logits[rows, pos_col]
    w = np.exp(logits - lse[:, None])
    w[rows, pos_col] -= 1.0
    w /= tau2 * n_valid

    # one row per (anchor, chosen candidate) pair
    pair_anchor = np.repeat(a_idx, present.size)
    pair_cand = chosen.ravel()
    _, du, dv = cosine_grad(anchors[pair_anchor], cands[pair_cand])
    wf = w.ravel()[:, None]
    grad += _scatter_rows(b, pair_anchor, wf * du) + _scatter_rows(b, cand_source[pair_cand], wf * dv)
    return float(np.mean(losses)), grad, n_valid


def loss_lp(f, f_cluster: int, supports, support_clusters, tau2: float) -> float:
    """Label-preserving loss of one actual feature against batch supports."""
    supports = as_matrix(supports)
    sc = np.asarray(support_clusters, dtype=np.int64)
    if not np.any(sc == f_cluster):
        raise DegenerateInputError("no support sample from the anchor's own cluster")
    loss, _, _ = lp_batch(as_matrix(f), np.array([f_cluster]), supports, sc,
                          np.zeros(len(sc), dtype=np.int64), tau2)
    return loss


def loss_lp_actual(f, f_cluster: int, batch, batch_clusters, tau2: float) -> float:
    """Label-preserving loss with positives and negatives drawn from actual samples."""
    return loss_lp(f, f_cluster, batch, batch_clusters, tau2)


def total_loss_and_grad(
    feats: np.ndarray,
    clusters: np.ndarray,
    entries: np.ndarray,
    supports: np.ndarray | None = None,
    beta: float = 0.1,
    tau1: float = 0.05,
    tau2: float = 0.6,
    lp_on: str | None = "support",
    rows: np.ndarray | None = None,
) -> tuple[LossTerms, GradientBuffer]:
    """Combined objective ``L_SE + beta * L_LP`` for one minibatch.

    ``supports`` is ``(B, K, d)`` or ``None`` for no support samples.
    ``lp_on`` chooses the label-preserving candidates: ``"support"``,
    ``"actual"`` or ``None``. The label-preserving term is not evaluated when
    ``beta == 0`` and is then reported as 0.
    """
    feats = as_matrix(feats)
    clusters = np.asarray(clusters, dtype=np.int64)
    b = feats.shape[0]
    views = [feats]
    if supports is not None:
        views += [supports[:, k, :] for k in range(supports.shape[1])]
    l_se, grad = se_batch(views, entries, clusters, tau1)

    l_lp = 0.0
    if beta != 0 and lp_on is not None:
        if lp_on == "support":
            if supports is None:
                raise ConfigError("label-preserving loss on supports needs support samples")
            k = supports.shape[1]
            cands = supports.reshape(b * k, -1)
            cand_clusters = np.repeat(clusters, k)
            cand_source = np.repeat(np.arange(b), k)
        elif lp_on == "actual":
            cands, cand_clusters, cand_source = feats, clusters, np.arange(b)
        else:
            raise ConfigError(f"unknown label-preserving source {lp_on!r}")
        l_lp, g_lp, _ = lp_batch(feats, clusters, cands, cand_clusters, cand_source, tau2)
        grad = grad + beta * g_lp

    terms = LossTerms(l_se=l_se, l_lp=l_lp, total=l_se + beta * l_lp, beta=beta, tau1=tau1, tau2=tau2)
    if rows is None:
        rows = np.arange(b)
    return terms, GradientBuffer(rows=np.asarray(rows), grads=grad)
