"""Synthetic identity-structured embeddings and the plain-text dump format.

Identities are unit-sphere centres. A fraction of them is drawn as two
separated modes (sub-cluster pressure) and some pairs of identities are
placed closer together than their own spread (mixed-cluster pressure).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .embedding import l2_normalize
from .errors import ConfigError

SPLITS = ("TRAIN", "QUERY", "GALLERY")
MAX_SAMPLES = 5_000_000
UNKNOWN_ID = -1


@dataclass
class ScenarioConfig:
    n_identities: int = 40
    samples_per_identity: int = 24
    d: int = 64
    intra_spread: float = 0.25
    split_fraction: float = 0.0
    split_gap: float = 1.0  # angle in radians between the two modes of a split identity
    overlap_pairs: int = 0
    overlap_gap: float = 0.1  # angle between the centres of an overlapping pair
    query_fraction: float = 0.2
    gallery_fraction: float = 0.2
    seed: int = 0

    def validate(self) -> None:
        if self.n_identities < 1:
            raise ConfigError("n_identities must be positive")
        if self.samples_per_identity < 2:
            raise ConfigError("samples_per_identity must be at least 2")
        if self.d < 2:
            raise ConfigError("dimension must be at least 2")
        if self.n_identities * self.samples_per_identity > MAX_SAMPLES:
            raise ConfigError(f"scenario exceeds {MAX_SAMPLES} samples")
        if not 0.0 <= self.split_fraction <= 1.0:
            raise ConfigError("split_fraction must lie in [0, 1]")
        if self.intra_spread < 0:
            raise ConfigError("intra_spread must be non-negative")
        n_split = round(self.split_fraction * self.n_identities)
        if 2 * self.overlap_pairs > self.n_identities - n_split:
            raise ConfigError("not enough unsplit identities for the requested overlap pairs")
        if self.query_fraction + self.gallery_fraction >= 1.0:
            raise ConfigError("query and gallery fractions leave no training samples")


@dataclass
class LabeledDataset:
    embeddings: np.ndarray  # (N, d)
    true_ids: np.ndarray  # int[N], UNKNOWN_ID when absent
    split: np.ndarray  # str[N] from SPLITS
    sample_ids: np.ndarray = field(default=None)

    def __post_init__(self):
        self.embeddings = np.asarray(self.embeddings, dtype=np.float64)
        self.true_ids = np.asarray(self.true_ids, dtype=np.int64)
        self.split = np.asarray(self.split, dtype="<U7")
        if self.sample_ids is None:
            self.sample_ids = np.arange(self.embeddings.shape[0])
        self.sample_ids = np.asarray(self.sample_ids, dtype=np.int64)

    @property
    def n(self) -> int:
        return self.embeddings.shape[0]

    @property
    def d(self) -> int:
        return self.embeddings.shape[1]

    def mask(self, split: str) -> np.ndarray:
        return self.split == split

    def copy(self) -> "LabeledDataset":
        return LabeledDataset(self.embeddings.copy(), self.true_ids.copy(), self.split.copy(), self.sample_ids.copy())


def _orthogonal_unit(rng: np.random.Generator, c: np.ndarray) -> np.ndarray:
    u = rng.standard_normal(c.shape[0])
    u -= (u @ c) * c
    return u / np.linalg.norm(u)


def _rotate(c: np.ndarray, u: np.ndarray, angle: float) -> np.ndarray:
    return np.cos(angle) * c + np.sin(angle) * u


def generate(config: ScenarioConfig) -> LabeledDataset:
    """Draw a dataset; the same config always yields the same arrays."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    n_id, spi, d = config.n_identities, config.samples_per_identity, config.d

    centres = l2_normalize(rng.standard_normal((n_id, d)))
    order = rng.permutation(n_id)
    n_split = round(config.split_fraction * n_id)
    split_ids = order[:n_split]
    rest = order[n_split:]
    for a, b in zip(rest[0:2 * config.overlap_pairs:2], rest[1:2 * config.overlap_pairs:2]):
        centres[b] = _rotate(centres[a], _orthogonal_unit(rng, centres[a]), config.overlap_gap)

    # one or two mode centres per identity; samples alternate between modes
    modes = np.repeat(centres[:, None, :], 2, axis=1)
    for i in split_ids:
        u = _orthogonal_unit(rng, centres[i])
        modes[i, 0] = _rotate(centres[i], u, config.split_gap / 2)
        modes[i, 1] = _rotate(centres[i], u, -config.split_gap / 2)

    idx = np.arange(spi)
    mode_of = idx % 2
    n_query = round(config.query_fraction * spi)
    n_gallery = round(config.gallery_fraction * spi)
    n_train = spi - n_query - n_gallery
    split_of = np.array(["TRAIN"] * n_train + ["QUERY"] * n_query + ["GALLERY"] * n_gallery)

    sigma = config.intra_spread / np.sqrt(d)
    base = modes[:, mode_of, :].reshape(n_id * spi, d)
    x = l2_normalize(base + sigma * rng.standard_normal(base.shape))
    true_ids = np.repeat(np.arange(n_id), spi)
    split = np.tile(split_of, n_id)

    # shuffle so sample ids carry no identity information
    perm = rng.permutation(n_id * spi)
    return LabeledDataset(x[perm], true_ids[perm], split[perm])


def dump(dataset: LabeledDataset, path) -> None:
    """Write ``N d`` then one ``sample_id true_id split v_1 .. v_d`` line per sample."""
    lines = [f"{dataset.n} {dataset.d}"]
    for sid, tid, sp, row in zip(dataset.sample_ids, dataset.true_ids, dataset.split, dataset.embeddings):
        lines.append(" ".join([str(int(sid)), str(int(tid)), str(sp)] + [repr(float(v)) for v in row]))
    Path(path).write_text("\n".join(lines) + "\n")


class DumpFormatError(ConfigError):
    def __init__(self, line: int, msg: str):
        super().__init__(f"line {line}: {msg}")
        self.line = line


def load(path) -> LabeledDataset:
    """Parse the dump format. ``true_id`` may be ``-1`` or ``-`` when unknown."""
    text = Path(path).read_text().splitlines()
    if not text:
        raise DumpFormatError(1, "empty file")
    head = text[0].split()
    try:
        n, d = int(head[0]), int(head[1])
        if len(head) != 2 or n < 0 or d < 1:
            raise ValueError
    except (ValueError, IndexError):
        raise DumpFormatError(1, "header must be 'N d'") from None
    body = [(i + 2, ln) for i, ln in enumerate(text[1:]) if ln.strip()]
    if len(body) != n:
        raise DumpFormatError(len(text), f"expected {n} sample lines, found {len(body)}")
    emb = np.empty((n, d))
    tids = np.empty(n, dtype=np.int64)
    sids = np.empty(n, dtype=np.int64)
    split = []
    for row, (lineno, ln) in enumerate(body):
        parts = ln.split()
        if len(parts) != d + 3:
            raise DumpFormatError(lineno, f"expected {d + 3} fields, found {len(parts)}")
        try:
            sids[row] = int(parts[0])
            tids[row] = UNKNOWN_ID if parts[1] == "-" else int(parts[1])
            emb[row] = [float(v) for v in parts[3:]]
        except ValueError as exc:
            raise DumpFormatError(lineno, str(exc)) from None
        if parts[2] not in SPLITS:
            raise DumpFormatError(lineno, f"unknown split {parts[2]!r}")
        if not np.all(np.isfinite(emb[row])):
            raise DumpFormatError(lineno, "non-finite coordinate")
        split.append(parts[2])
    return LabeledDataset(emb, tids, np.array(split), sids)
