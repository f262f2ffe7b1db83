"""Bidirectional skip-frame video anomaly detection.

Two convolutional autoencoders predict the same frame from opposite temporal
directions; training uses skip-frame inputs, testing uses consecutive frames,
and fused prediction errors become per-frame anomaly scores.
"""

from .attention import ContextSpatialAttention, VarianceChannelAttention
from .config import ExperimentConfig, load_config
from .data import FrameClip, load_dataset, make_test_windows, make_training_samples
from .errors import BispError, ConfigurationError, DataError, TrainingDivergedError
from .losses import LossBundle, consistency_loss, prediction_loss, ssim, total_loss
from .model import (
    BispModel,
    VariantSpec,
    ablation_variants,
    build_variant,
    load_checkpoint,
    save_checkpoint,
    strategy_variants,
)
from .scoring import (
    RocResult,
    ScoreSeries,
    ScoringConfig,
    anomaly_scores,
    compute_auc,
    multiscale_psnr,
)
from .synth import SynthSpec, describe, generate
from .train import (
    EvalResult,
    TrainConfig,
    TrainResult,
    collect_error_pairs,
    evaluate,
    run_ablation_grid,
    run_weight_sweep,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "BispError",
    "BispModel",
    "ConfigurationError",
    "ContextSpatialAttention",
    "DataError",
    "EvalResult",
    "ExperimentConfig",
    "FrameClip",
    "LossBundle",
    "RocResult",
    "ScoreSeries",
    "ScoringConfig",
    "SynthSpec",
    "TrainConfig",
    "TrainResult",
    "TrainingDivergedError",
    "VarianceChannelAttention",
    "VariantSpec",
    "ablation_variants",
    "anomaly_scores",
    "build_variant",
    "collect_error_pairs",
    "compute_auc",
    "consistency_loss",
    "describe",
    "evaluate",
    "generate",
    "load_checkpoint",
    "load_config",
    "load_dataset",
    "make_test_windows",
    "make_training_samples",
    "multiscale_psnr",
    "prediction_loss",
    "run_ablation_grid",
    "run_weight_sweep",
    "save_checkpoint",
    "ssim",
    "strategy_variants",
    "total_loss",
    "train",
]
