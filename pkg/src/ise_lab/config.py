"""Run configuration: nested dataclasses read from flat ``section.key = value`` text.

Lines may also be grouped under ``[section]`` headers. ``#`` starts a
comment. Values are coerced to the type of the field's default.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import ConfigError
from .memory import UpdateMode
from .pli import DirectionKind, ScheduleKind
from .synthdata import ScenarioConfig


class Mode(str, Enum):
    BASELINE = "BASELINE"  # InfoNCE on centroids, no support samples
    ISE = "ISE"  # support samples + label-preserving loss on supports
    LP_ACTUAL = "LP_ACTUAL"  # label-preserving loss on actual samples only


@dataclass
class ClusterConfig:
    eps: float = 0.4
    min_points: int = 4


@dataclass
class MemoryConfig:
    mu: float = 0.2
    update_mode: UpdateMode = UpdateMode.HARDEST


@dataclass
class PLIConfig:
    lambda0: float = 1.0
    schedule: ScheduleKind = ScheduleKind.LOGARITHM
    direction: DirectionKind = DirectionKind.NEAREST
    k: int = 1


@dataclass
class LossConfig:
    beta: float = 0.1
    tau1: float = 0.05
    tau2: float = 0.6


@dataclass
class TrainConfig:
    mode: Mode = Mode.ISE
    epochs: int = 30
    batch_size: int = 64
    instances: int = 4
    lr: float = 0.1
    lr_decay_epochs: list = field(default_factory=lambda: [20])
    lr_decay_factor: float = 0.1
    iters_per_epoch: int = 0  # 0: ceil(clustered pool size / batch size)
    train_on: str = "all"  # "all" samples or only the "train" split
    dump_embeddings: bool = False


@dataclass
class Config:
    seed: int = 0
    data: ScenarioConfig = field(default_factory=ScenarioConfig)
    cluster: ClusterConfig = field(default_factory=ClusterConfig)
    memory: MemoryConfig = field(default_factory=MemoryConfig)
    pli: PLIConfig = field(default_factory=PLIConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    def validate(self) -> None:
        t = self.train
        if t.batch_size < 1 or t.instances < 1 or t.batch_size % t.instances:
            raise ConfigError("train.batch_size must be a positive multiple of train.instances")
        if not t.lr > 0:
            raise ConfigError("train.lr must be positive")
        if t.epochs < 1:
            raise ConfigError("train.epochs must be positive")
        if t.iters_per_epoch < 0:
            raise ConfigError("train.iters_per_epoch must be non-negative")
        if t.train_on not in ("all", "train"):
            raise ConfigError("train.train_on must be 'all' or 'train'")
        if self.pli.k < 1:
            raise ConfigError("pli.k must be positive")
        if self.pli.lambda0 < 0:
            raise ConfigError("pli.lambda0 must be non-negative")
        if not 0 <= self.memory.mu <= 1:
            raise ConfigError("memory.mu must lie in [0, 1]")
        if self.loss.tau1 <= 0 or self.loss.tau2 <= 0:
            raise ConfigError("temperatures must be positive")
        if self.cluster.eps <= 0 or self.cluster.min_points < 1:
            raise ConfigError("cluster.eps must be positive and cluster.min_points >= 1")
        self.scenario().validate()

    def scenario(self) -> ScenarioConfig:
        return dataclasses.replace(self.data, seed=self.seed)

    def flat(self) -> dict:
        """Fully resolved ``{dotted key: value}`` mapping, in declaration order."""
        out = {"seed": self.seed}
        for f in dataclasses.fields(self):
            sub = getattr(self, f.name)
            if dataclasses.is_dataclass(sub):
                for g in dataclasses.fields(sub):
                    if f.name == "data" and g.name == "seed":
                        continue
                    out[f"{f.name}.{g.name}"] = _format(getattr(sub, g.name))
        return out

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.flat().items())


def _format(value):
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, list):
        return ",".join(str(v) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return value


def _coerce(raw: str, current, key: str):
    raw = raw.strip()
    if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "'\"":
        raw = raw[1:-1]
    try:
        if isinstance(current, Enum):
            return type(current)(raw.upper())
        if isinstance(current, bool):
            low = raw.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(current, int):
            return int(raw)
        if isinstance(current, float):
            return float(raw)
        if isinstance(current, list):
            raw = raw.strip("[]")
            return [int(v) for v in raw.replace(",", " ").split()]
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def set_key(cfg: Config, key: str, raw: str) -> None:
    parts = key.strip().split(".")
    target = cfg
    for p in parts[:-1]:
        if not hasattr(target, p) or not dataclasses.is_dataclass(getattr(target, p)):
            raise ConfigError(f"unknown config section in {key!r}")
        target = getattr(target, p)
    name = parts[-1]
    if not dataclasses.is_dataclass(target) or name not in {f.name for f in dataclasses.fields(target)}:
        raise ConfigError(f"unknown config key {key!r}")
    current = getattr(target, name)
    if dataclasses.is_dataclass(current):
        raise ConfigError(f"{key!r} is a section, not a key")
    setattr(target, name, _coerce(raw, current, key))


def parse_pairs(text: str, source: str = "<config>") -> list[tuple[str, str]]:
    """Split config text into ``(dotted key, raw value)`` pairs."""
    pairs = []
    section = ""
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        k, v = line.split("=", 1)
        k = k.strip()
        pairs.append((f"{section}.{k}" if section else k, v.strip()))
    return pairs


def parse_override(item: str) -> tuple[str, str]:
    if "=" not in item:
        raise ConfigError(f"override must look like key=value, got {item!r}")
    k, v = item.split("=", 1)
    return k.strip(), v.strip()


def load_config(path=None, overrides=(), base: Config | None = None) -> Config:
    cfg = base if base is not None else Config()
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {p}: {exc.strerror or exc}") from None
        for k, v in parse_pairs(text, str(p)):
            set_key(cfg, k, v)
    for item in overrides:
        k, v = parse_override(item) if isinstance(item, str) else item
        set_key(cfg, k, v)
    cfg.validate()
    return cfg
