"""Brute-force reference implementations used only by the tests.

Nothing here imports from ise_lab; every quantity is recomputed from
first principles with plain Python loops so that agreement with the main
path means something.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from itertools import combinations

NOISE = -1


@dataclass
class OracleReport:
    case: str
    main: float
    oracle: float

    @property
    def abs_dev(self) -> float:
        return abs(self.main - self.oracle)

    @property
    def rel_dev(self) -> float:
        return self.abs_dev / max(abs(self.oracle), 1e-300)


def _dot(u, v):
    return sum(a * b for a, b in zip(u, v))


def _cos(u, v):
    return _dot(u, v) / math.sqrt(_dot(u, u) * _dot(v, v))


# --------------------------------------------------------------------- DBSCAN

def oracle_dbscan(points, eps, min_points):
    """Textbook DBSCAN over cosine distance with BFS cluster expansion.

    Seeds are taken in ascending id order, and border points join the
    cluster of their lowest-id core neighbour.
    """
    n = len(points)
    if n > 500:
        raise ValueError("oracle DBSCAN refuses N > 500")
    pts = [list(map(float, p)) for p in points]
    nbrs = [[j for j in range(n) if 1.0 - _cos(pts[i], pts[j]) <= eps or i == j] for i in range(n)]
    core = [len(nb) >= min_points for nb in nbrs]
    labels = [NOISE] * n
    cluster = 0
    for seed in range(n):
        if not core[seed] or labels[seed] != NOISE:
            continue
        labels[seed] = cluster
        queue = deque([seed])
        while queue:
            p = queue.popleft()
            for q in nbrs[p]:
                if core[q] and labels[q] == NOISE:
                    labels[q] = cluster
                    queue.append(q)
        cluster += 1
    for i in range(n):
        if core[i]:
            continue
        for j in sorted(nbrs[i]):
            if core[j]:
                labels[i] = labels[j]
                break
    return labels


def same_partition(a, b) -> bool:
    """True when two label lists induce the same partition, NOISE kept as-is."""
    if len(a) != len(b):
        return False
    fwd, back = {}, {}
    for x, y in zip(a, b):
        if (x == NOISE) != (y == NOISE):
            return False
        if x == NOISE:
            continue
        if fwd.setdefault(x, y) != y or back.setdefault(y, x) != x:
            return False
    return True


# ----------------------------------------------------------- finite differences

def oracle_finite_diff(loss_closure, table, h=1e-6):
    """Central-difference gradient of ``loss_closure(table)`` over every entry.

    ``table`` is a list of lists (or array); it is copied, never mutated.
    """
    if not 1e-8 <= h <= 1e-4:
        raise ValueError("step must lie in [1e-8, 1e-4]")
    base = [list(map(float, row)) for row in table]
    grad = [[0.0] * len(row) for row in base]
    for i, row in enumerate(base):
        for j in range(len(row)):
            plus = [r[:] for r in base]
            minus = [r[:] for r in base]
            plus[i][j] += h
            minus[i][j] -= h
            fp, fm = loss_closure(plus), loss_closure(minus)
            if not (math.isfinite(fp) and math.isfinite(fm)):
                raise FloatingPointError(f"non-finite loss at ({i}, {j})")
            grad[i][j] = (fp - fm) / (2 * h)
    return grad


# --------------------------------------------------------------- loss oracles

def _neg_log_softmax(logits, pos):
    m = max(logits)
    return -(logits[pos] - m - math.log(sum(math.exp(z - m) for z in logits)))


def oracle_info_nce(f, entries, pos, tau):
    return _neg_log_softmax([_cos(f, m) / tau for m in entries], pos)


def oracle_lp(anchor, anchor_cluster, cands, cand_clusters, tau):
    """Label-preserving loss with an exhaustive hardest search.

    Ties go to the lowest candidate index. Returns ``(loss, positive index,
    {cluster: negative index})``.
    """
    pos, pos_sim = None, None
    negs = {}
    for j, (g, c) in enumerate(zip(cands, cand_clusters)):
        s = _cos(anchor, g)
        if c == anchor_cluster:
            if pos is None or s < pos_sim:
                pos, pos_sim = j, s
        else:
            if c not in negs or s > negs[c][1]:
                negs[c] = (j, s)
    logits = [pos_sim / tau] + [negs[c][1] / tau for c in sorted(negs)]
    return _neg_log_softmax(logits, 0), pos, {c: negs[c][0] for c in negs}


# ------------------------------------------------------------ cluster metrics

def _pair_counts(pred, true):
    tp = fp = fn = tn = 0
    for i, j in combinations(range(len(pred)), 2):
        same_p = pred[i] == pred[j]
        same_t = true[i] == true[j]
        if same_p and same_t:
            tp += 1
        elif same_p:
            fp += 1
        elif same_t:
            fn += 1
        else:
            tn += 1
    return tp, fp, fn, tn


def _entropy(counts, n):
    return -sum(c / n * math.log(c / n) for c in counts if c)


def _contingency(pred, true):
    table = {}
    for p, t in zip(pred, true):
        table[(t, p)] = table.get((t, p), 0) + 1
    a, b = {}, {}
    for (t, p), v in table.items():
        a[t] = a.get(t, 0) + v
        b[p] = b.get(p, 0) + v
    return table, a, b


def _mutual_info(table, a, b, n):
    return sum(v / n * math.log(n * v / (a[t] * b[p])) for (t, p), v in table.items())


def _expected_mi(a, b, n):
    """Exact expected mutual information under the hypergeometric model."""
    total = 0.0
    lg = math.lgamma
    for ai in a.values():
        for bj in b.values():
            lo = max(1, ai + bj - n)
            for nij in range(lo, min(ai, bj) + 1):
                term = nij / n * math.log(n * nij / (ai * bj))
                logp = (lg(ai + 1) + lg(bj + 1) + lg(n - ai + 1) + lg(n - bj + 1)
                        - lg(n + 1) - lg(nij + 1) - lg(ai - nij + 1) - lg(bj - nij + 1)
                        - lg(n - ai - bj + nij + 1))
                total += term * math.exp(logp)
    return total


def oracle_pair_metrics(pred, true):
    """(fowlkes_mallows, adjusted_rand, adjusted_mutual_info, v_measure)."""
    n = len(pred)
    if n > 2000:
        raise ValueError("oracle metrics refuse N > 2000")
    tp, fp, fn, tn = _pair_counts(pred, true)
    fmi = tp / math.sqrt((tp + fp) * (tp + fn)) if tp else 0.0
    if fp == 0 and fn == 0:
        ari = 1.0
    else:
        ari = 2.0 * (tp * tn - fn * fp) / ((tp + fn) * (fn + tn) + (tp + fp) * (fp + tn))

    table, a, b = _contingency(pred, true)
    h_true = _entropy(a.values(), n)
    h_pred = _entropy(b.values(), n)
    mi = _mutual_info(table, a, b, n)
    if len(a) == len(b) == 1:
        ami = 1.0
    else:
        emi = _expected_mi(a, b, n)
        ami = (mi - emi) / ((h_true + h_pred) / 2.0 - emi)

    homog = 1.0 if h_true == 0 else 1.0 - (h_true - mi) / h_true
    compl = 1.0 if h_pred == 0 else 1.0 - (h_pred - mi) / h_pred
    v = 0.0 if homog + compl == 0 else 2.0 * homog * compl / (homog + compl)
    return fmi, ari, ami, v


# ------------------------------------------------------------------ retrieval

def oracle_average_precision(sims, gallery_ids, query_id):
    """AP of one query by walking the ranked list."""
    ranked = sorted(range(len(sims)), key=lambda j: (-sims[j], j))
    hits, precisions = 0, []
    for rank, j in enumerate(ranked, 1):
        if gallery_ids[j] == query_id:
            hits += 1
            precisions.append(hits / rank)
    return sum(precisions) / len(precisions)
