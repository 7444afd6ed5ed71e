"""Discrete flow matching for collaborative filtering on implicit feedback."""

__version__ = "0.1.0"

from .data import DatasetSplit, InteractionMatrix, load_bundle, prepare, read_ratings, save_bundle
from .evaluation import MetricReport, evaluate
from .infer import InferConfig, infer, recommend_topk
from .model import FlowModel, ModelConfig, init_model, load_checkpoint, save_checkpoint
from .prior import PriorSpec, sample_prior
from .train import TrainConfig, TrainLog, fit

__all__ = [
    "DatasetSplit",
    "FlowModel",
    "InferConfig",
    "InteractionMatrix",
    "MetricReport",
    "ModelConfig",
    "PriorSpec",
    "TrainConfig",
    "TrainLog",
    "evaluate",
    "fit",
    "infer",
    "init_model",
    "load_bundle",
    "load_checkpoint",
    "prepare",
    "read_ratings",
    "recommend_topk",
    "sample_prior",
    "save_bundle",
    "save_checkpoint",
]
