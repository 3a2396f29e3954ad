"""Disentangled forecasting of noisy 2D pedestrian pose sequences.

A pose track from an egocentric camera is completed (low-confidence joints
restored by a denoising autoencoder), split into a global stream (the neck
anchor with depth and camera egomotion) and a local stream (anchor-relative
offsets), forecast per stream with convolutional sequence models, and
recombined into future poses.  Everything runs on synthetic scenes with a
controlled detector noise model, so results are exactly reproducible.
"""

__version__ = "0.1.0"

from .baselines import (BASELINES, constant_velocity, last_observed_velocity,
                        zero_velocity)
from .completion import CompletionModel, complete, complete_sequence, train_completion
from .config import ConfigError, ExperimentConfig
from .dataset import DatasetFormatError, load_dataset, save_dataset
from .forecast import (EntangledForecaster, GlobalForecaster, LocalForecaster,
                       PipelineError, forecast_entangled, forecast_locomotion,
                       train_entangled, train_global, train_local)
from .pose import (ANCHOR, N_JOINTS, SKELETON_EDGES, Keypoint, LocomotionSequence,
                   Pose, confidence_filter, kde, mean_kde)
from .report import evaluate, write_report
from .streams import GlobalStream, LocalStream, decompose, recombine
from .synth import (NoiseConfig, PinholeCamera, TransformSE3, WalkerConfig,
                    annotate_noisy, chain_transforms, generate_scene, make_dataset)

__all__ = [
    "__version__",
    "ANCHOR", "N_JOINTS", "SKELETON_EDGES",
    "Keypoint", "Pose", "LocomotionSequence", "confidence_filter", "kde", "mean_kde",
    "GlobalStream", "LocalStream", "decompose", "recombine",
    "CompletionModel", "complete", "complete_sequence", "train_completion",
    "GlobalForecaster", "LocalForecaster", "EntangledForecaster", "PipelineError",
    "forecast_locomotion", "forecast_entangled",
    "train_local", "train_global", "train_entangled",
    "BASELINES", "zero_velocity", "constant_velocity", "last_observed_velocity",
    "TransformSE3", "PinholeCamera", "WalkerConfig", "NoiseConfig",
    "chain_transforms", "generate_scene", "annotate_noisy", "make_dataset",
    "ExperimentConfig", "ConfigError",
    "DatasetFormatError", "load_dataset", "save_dataset",
    "evaluate", "write_report",
]
