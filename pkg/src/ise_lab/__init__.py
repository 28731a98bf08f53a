"""Implicit sample extension on a learnable embedding table."""
from .clustering import NOISE, ClusterState, compute_centroids, dbscan
from .config import Config, Mode, load_config
from .embedding import cosine_sim, l2_normalize
from .memory import MemoryBank, UpdateMode
from .metrics import ClusterQuality, RetrievalScores, cluster_quality, evaluate_retrieval
from .pli import DegreeSchedule, DirectionKind, ScheduleKind, degree, generate_support, select_directions
from .synthdata import LabeledDataset, ScenarioConfig, generate
from .trainer import RunResult, Trainer, run

__version__ = "0.1.0"
