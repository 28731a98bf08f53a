"""Paired ablation sweeps: every arm of a matrix runs on the same dataset per seed."""
from __future__ import annotations

import copy
import hashlib
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import Config, set_key
from .errors import ConfigError, IseLabError
from .synthdata import LabeledDataset, generate
from .trainer import RECORD_COLUMNS, run

log = logging.getLogger(__name__)

SUMMARY_METRICS = ("fowlkes_mallows", "adjusted_rand", "adjusted_mutual_info", "v_measure",
                   "map", "cmc1", "cmc5", "cmc10", "n_clusters", "n_noise")


def _directions():
    arms = {}
    for direction in ("NEAREST", "FARTHEST", "RANDOM"):
        for lam in ("0.1", "0.5", "1.0", "2.0"):
            arms[f"{direction.lower()}_l{lam}"] = {"train.mode": "ISE", "pli.direction": direction,
                                                   "pli.lambda0": lam}
    return arms


MATRICES = {
    "components": {
        "baseline": {"train.mode": "BASELINE"},
        "pli_only": {"train.mode": "ISE", "loss.beta": "0"},
        "lp_actual": {"train.mode": "LP_ACTUAL"},
        "pli_fixed_lp": {"train.mode": "ISE", "pli.schedule": "CONSTANT"},
        "full": {"train.mode": "ISE"},
    },
    "schedules": {f"schedule_{s.lower()}": {"train.mode": "ISE", "pli.schedule": s}
               for s in ("CONSTANT", "LINEAR", "SQUARE", "LOGARITHM")},
    "directions": _directions(),
    "support_count": {f"k{k}": {"train.mode": "ISE", "pli.k": str(k)} for k in (1, 3, 5, 10)},
}


@dataclass
class ArmResult:
    arm: str
    seed: int
    rows: list = field(default_factory=list)
    error: str | None = None


def arm_config(base: Config, seed: int, overrides: dict) -> Config:
    cfg = copy.deepcopy(base)
    cfg.seed = seed
    for k, v in overrides.items():
        if k == "seed" or k.startswith("data."):
            raise ConfigError(f"arm override {k!r} would break dataset pairing")
        set_key(cfg, k, v)
    cfg.validate()
    return cfg


def _run_one(job):
    arm, seed, cfg, dataset = job
    try:
        return ArmResult(arm, seed, [r.row() for r in run(dataset, cfg).records])
    except IseLabError as exc:
        return ArmResult(arm, seed, error=f"{type(exc).__name__}: {exc}")


def run_matrix(base: Config, arms: dict, seeds, workers: int = 1) -> list[ArmResult]:
    """Run every (arm, seed) pair. Arm failures are captured, not raised.

    An arm whose overrides do not form a valid config fails for every seed
    without stopping the other arms. Results come back in seed-major order.
    """
    seeds = list(seeds)
    if not seeds:
        raise ConfigError("seed list is empty")
    if not arms:
        raise ConfigError("no arms to run")
    jobs, failed = [], {}
    for s in seeds:
        ds = generate(arm_config(base, s, {}).scenario())
        for a, ov in arms.items():
            try:
                jobs.append((a, s, arm_config(base, s, ov), ds))
            except ConfigError as exc:
                failed[a, s] = ArmResult(a, s, error=f"ConfigError: {exc}")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(_run_one, jobs))
    else:
        done = []
        for job in jobs:
            log.info("arm %s seed %d", job[0], job[1])
            done.append(_run_one(job))
    by_key = {(r.arm, r.seed): r for r in done}
    by_key.update(failed)
    return [by_key[a, s] for s in seeds for a in arms]


def final_rows(results: list[ArmResult]) -> dict:
    """``{arm: {seed: final-epoch row}}`` for the arms that completed."""
    out = {}
    for r in results:
        if r.error is None:
            out.setdefault(r.arm, {})[r.seed] = r.rows[-1]
    return out


def summarise(results: list[ArmResult]) -> list[dict]:
    """Mean and population std of final-epoch metrics per arm, in arm order."""
    finals = final_rows(results)
    order = list(dict.fromkeys(r.arm for r in results))
    rows = []
    for arm in order:
        per_seed = finals.get(arm, {})
        n_failed = sum(1 for r in results if r.arm == arm and r.error is not None)
        row = {"arm": arm, "n_seeds": len(per_seed), "n_failed": n_failed}
        for m in SUMMARY_METRICS:
            vals = np.array([per_seed[s][m] for s in sorted(per_seed)], dtype=float)
            row[f"{m}_mean"] = float(vals.mean()) if vals.size else float("nan")
            row[f"{m}_std"] = float(vals.std()) if vals.size else float("nan")
        rows.append(row)
    return rows


def arm_columns() -> tuple:
    return ("seed",) + RECORD_COLUMNS


def summary_columns() -> tuple:
    return ("arm", "n_seeds", "n_failed") + tuple(f"{m}_{s}" for m in SUMMARY_METRICS for s in ("mean", "std"))


def dataset_fingerprint(ds: LabeledDataset) -> str:
    h = hashlib.sha256()
    for a in (ds.embeddings, ds.true_ids, ds.split.astype("U7"), ds.sample_ids):
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()
