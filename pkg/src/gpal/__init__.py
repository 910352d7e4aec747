"""gpal: label-efficient active learning with a sparse variational GP classifier."""

from .data import FeatureDataset, SynthSpec, class_stats, load_features, save_features, synth_blobs
from .engine import ALConfig, RunReport, SimulatedOracle, run_al
from .errors import (
    DataFormatError,
    GpalError,
    NumericalError,
    OracleError,
    TruncationError,
    ValidationError,
)
from .kernels import KernelParams, gram, rbf
from .svgp import SvgpModel, TrainConfig, init_model, predict_latent, predict_proba, train

__version__ = "0.1.0"

__all__ = [
    "ALConfig",
    "DataFormatError",
    "FeatureDataset",
    "GpalError",
    "KernelParams",
    "NumericalError",
    "OracleError",
    "RunReport",
    "SimulatedOracle",
    "SvgpModel",
    "SynthSpec",
    "TrainConfig",
    "TruncationError",
    "ValidationError",
    "class_stats",
    "gram",
    "init_model",
    "load_features",
    "predict_latent",
    "predict_proba",
    "rbf",
    "run_al",
    "save_features",
    "synth_blobs",
    "train",
]
