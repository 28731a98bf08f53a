"""Epoch loop: cluster, re-initialise memory, then train the embedding table.

The "network" is the embedding table itself, updated by plain SGD on the
rows that appear in each minibatch.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .clustering import NOISE, ClusterState, dbscan
from .config import Config, Mode
from .errors import DegenerateInputError
from .losses import total_loss_and_grad
from .memory import MemoryBank
from .metrics import ClusterQuality, cluster_quality, evaluate_retrieval
from .pli import DegreeSchedule, interpolate, select_directions_batch
from .synthdata import UNKNOWN_ID, LabeledDataset, dump

log = logging.getLogger(__name__)

RECORD_COLUMNS = (
    "epoch", "n_clusters", "n_noise", "l_se", "l_lp",
    "fowlkes_mallows", "adjusted_rand", "adjusted_mutual_info", "v_measure",
    "map", "cmc1", "cmc5", "cmc10", "lambda",
)
NAN = float("nan")


@dataclass
class EpochRecord:
    epoch: int
    n_clusters: int
    n_noise: int
    l_se: float
    l_lp: float
    fowlkes_mallows: float
    adjusted_rand: float
    adjusted_mutual_info: float
    v_measure: float
    map: float
    cmc1: float
    cmc5: float
    cmc10: float
    # "lambda" is a keyword, so the field is lam and the column is lambda
    lam: float

    def row(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return {k: d[k] for k in RECORD_COLUMNS}


@dataclass
class RunResult:
    records: list
    embeddings: np.ndarray
    state: ClusterState
    initial: dict = field(default_factory=dict)


def clustering_domain(dataset: LabeledDataset, train_on: str) -> np.ndarray:
    """Sample indices that take part in clustering and training."""
    if train_on == "all":
        return np.arange(dataset.n)
    return np.flatnonzero(dataset.mask("TRAIN"))


def evaluate_state(dataset: LabeledDataset, table: np.ndarray, domain: np.ndarray,
                   state: ClusterState) -> dict:
    """Cluster quality of ``state`` plus retrieval scores on QUERY/GALLERY.

    Sections that cannot be computed (no true ids, no queries, too few
    clustered samples) come back as NaN.
    """
    out = {"n_clusters": state.n_clusters, "n_noise": state.n_noise}
    true = dataset.true_ids[domain]
    q = ClusterQuality(NAN, NAN, NAN, NAN)
    if np.all(true != UNKNOWN_ID):
        try:
            q = cluster_quality(state.labels, true)
        except DegenerateInputError as exc:
            log.warning("cluster quality unavailable: %s", exc)
    out.update(q.as_dict())
    qm, gm = dataset.mask("QUERY"), dataset.mask("GALLERY")
    out.update(map=NAN, cmc1=NAN, cmc5=NAN, cmc10=NAN)
    if qm.any() and gm.any():
        try:
            r = evaluate_retrieval(table[qm], table[gm], dataset.true_ids[qm], dataset.true_ids[gm])
            out.update(map=r.map, cmc1=r.cmc[1], cmc5=r.cmc[5], cmc10=r.cmc[10])
        except DegenerateInputError as exc:
            log.warning("retrieval unavailable: %s", exc)
    return out


def sample_batch(labels: np.ndarray, n_clusters_batch: int, instances: int,
                 rng: np.random.Generator) -> np.ndarray:
    """PK minibatch: ``n_clusters_batch`` clusters times ``instances`` members.

    Members are drawn without replacement unless the cluster is smaller
    than ``instances``. Returned positions are sorted ascending.
    """
    labels = np.asarray(labels)
    clusters = np.unique(labels[labels != NOISE])
    if clusters.size == 0:
        raise DegenerateInputError("no clusters to sample from")
    if clusters.size < n_clusters_batch:
        log.warning("only %d clusters for %d per batch; shrinking batch", clusters.size, n_clusters_batch)
        n_clusters_batch = clusters.size
    chosen = rng.choice(clusters, size=n_clusters_batch, replace=False)
    picks = []
    for c in np.sort(chosen):
        members = np.flatnonzero(labels == c)
        picks.append(rng.choice(members, size=instances, replace=members.size < instances))
    return np.sort(np.concatenate(picks))


class Trainer:
    """Runs the full schedule for one config over one dataset."""

    def __init__(self, config: Config, dump_dir=None):
        config.validate()
        self.cfg = config
        self.dump_dir = Path(dump_dir) if dump_dir is not None else None
        seeds = np.random.SeedSequence(config.seed).spawn(2)
        self.sampler_rng = np.random.default_rng(seeds[0])
        self.direction_rng = np.random.default_rng(seeds[1])

    def _cluster(self, table: np.ndarray, domain: np.ndarray) -> ClusterState:
        return dbscan(table[domain], self.cfg.cluster.eps, self.cfg.cluster.min_points)

    def lr_at(self, epoch: int) -> float:
        t = self.cfg.train
        n_decays = sum(1 for e in t.lr_decay_epochs if epoch > e)
        return t.lr * t.lr_decay_factor ** n_decays

    def run(self, dataset: LabeledDataset) -> RunResult:
        cfg, tc = self.cfg, self.cfg.train
        if np.unique(dataset.true_ids).size < 2 and np.all(dataset.true_ids != UNKNOWN_ID):
            raise DegenerateInputError("dataset needs at least two identities")
        table = dataset.embeddings.copy()
        domain = clustering_domain(dataset, tc.train_on)
        if domain.size == 0:
            raise DegenerateInputError("no samples to train on")
        iters = tc.iters_per_epoch or math.ceil(domain.size / tc.batch_size)
        total = tc.epochs * iters
        uses_support = tc.mode is Mode.ISE
        schedule = DegreeSchedule(cfg.pli.schedule, cfg.pli.lambda0, total)

        state = self._cluster(table, domain)
        initial = evaluate_state(dataset, table, domain, state)
        records = []
        t = 0
        for epoch in range(1, tc.epochs + 1):
            lr = self.lr_at(epoch)
            lam = schedule(t + iters) if uses_support else 0.0
            if state.n_clusters < 2:
                log.warning("epoch %d: %d clusters, skipping training", epoch, state.n_clusters)
                t += iters
                l_se = l_lp = NAN
            else:
                l_se, l_lp = self._train_epoch(table, domain, state, schedule, t, iters, lr)
                t += iters
            state = self._cluster(table, domain)
            ev = evaluate_state(dataset, table, domain, state)
            records.append(EpochRecord(epoch=epoch, l_se=l_se, l_lp=l_lp, lam=lam, **ev))
            if tc.dump_embeddings and self.dump_dir is not None:
                out = dataset.copy()
                out.embeddings = table.copy()
                dump(out, self.dump_dir / f"embeddings_epoch{epoch:03d}.txt")
        return RunResult(records=records, embeddings=table, state=state, initial=initial)

    def _train_epoch(self, table, domain, state, schedule, t0, iters, lr):
        cfg, tc = self.cfg, self.cfg.train
        bank = MemoryBank.from_centroids(state.centroids, cfg.memory.mu, cfg.memory.update_mode)
        uses_support = tc.mode is Mode.ISE
        lp_on = {Mode.BASELINE: None, Mode.ISE: "support", Mode.LP_ACTUAL: "actual"}[tc.mode]
        k = cfg.pli.k
        if uses_support and k >= state.n_clusters:
            log.warning("k=%d with only %d clusters; using k=%d", k, state.n_clusters, state.n_clusters - 1)
            k = state.n_clusters - 1
        n_cb = tc.batch_size // tc.instances
        if state.n_clusters < n_cb:
            log.warning("only %d clusters for %d per batch; shrinking batch", state.n_clusters, n_cb)
            n_cb = state.n_clusters
        se_sum = lp_sum = 0.0
        for i in range(iters):
            t = t0 + i + 1
            pos = sample_batch(state.labels, n_cb, tc.instances, self.sampler_rng)
            rows = domain[pos]
            y = state.labels[pos]
            feats = table[rows]
            supports = None
            if uses_support:
                lam = schedule(t)
                targets = select_directions_batch(feats, bank.entries, y, k, cfg.pli.direction, self.direction_rng)
                supports = interpolate(feats[:, None, :], bank.entries[y][:, None, :], bank.entries[targets], lam)
            terms, gb = total_loss_and_grad(
                feats, y, bank.entries, supports,
                beta=cfg.loss.beta, tau1=cfg.loss.tau1, tau2=cfg.loss.tau2, lp_on=lp_on, rows=rows,
            )
            # lr is a per-sample step: undo the batch mean of the loss
            np.add.at(table, gb.rows, -(lr * len(rows)) * gb.grads)
            if supports is None:
                bank.apply_batch(feats, y)
            else:
                # each actual row followed by its supports keeps sample-id order
                union = np.concatenate([feats[:, None, :], supports], axis=1).reshape(-1, feats.shape[1])
                bank.apply_batch(union, np.repeat(y, supports.shape[1] + 1))
            se_sum += terms.l_se
            lp_sum += terms.l_lp
        return se_sum / iters, lp_sum / iters


def run(dataset: LabeledDataset, config: Config, dump_dir=None) -> RunResult:
    return Trainer(config, dump_dir).run(dataset)
