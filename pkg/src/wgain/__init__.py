"""WGAIN image inpainting toolkit.

Adversarial imputation of missing image regions with a Wasserstein critic,
plus the classical biharmonic baseline, quality metrics, an evaluation
harness, a CLI, and an HTTP inference service.
"""

__version__ = "0.1.0"

from .errors import (
    CheckpointError,
    ContractError,
    DivergenceError,
    IngestionError,
    ValidationError,
    WgainError,
)
from .masks import (
    Mask,
    ScenarioKind,
    ScenarioSpec,
    gen_center_square_mask,
    gen_multi_square_mask_eval,
    gen_multi_square_mask_train,
    gen_noise_mask,
    missing_fraction,
    sample_eval_mask,
    sample_training_mask,
    standard_eval_scenarios,
)
from .model import (
    CriticConfig,
    GeneratorConfig,
    WgainModel,
    build_model,
    compose_output,
    hard_sigmoid,
    inpaint_image,
    sample_noise,
    scaled_config,
)
from .training import TrainConfig, StepReport, Trainer, train
from .metrics import evaluate_pair, psnr, ssim
from .baseline import biharmonic_inpaint
from .checkpoints import load_checkpoint, save_checkpoint
from .evaluation import EvalReport, run_scenarios, write_table

__all__ = [
    "__version__",
    "WgainError", "ValidationError", "ContractError", "IngestionError",
    "DivergenceError", "CheckpointError",
    "Mask", "ScenarioKind", "ScenarioSpec",
    "gen_noise_mask", "gen_center_square_mask",
    "gen_multi_square_mask_eval", "gen_multi_square_mask_train",
    "missing_fraction", "sample_eval_mask", "sample_training_mask",
    "standard_eval_scenarios",
    "GeneratorConfig", "CriticConfig", "WgainModel", "build_model",
    "hard_sigmoid", "compose_output", "sample_noise", "inpaint_image",
    "scaled_config",
    "TrainConfig", "StepReport", "Trainer", "train",
    "psnr", "ssim", "evaluate_pair",
    "biharmonic_inpaint",
    "save_checkpoint", "load_checkpoint",
    "EvalReport", "run_scenarios", "write_table",
]
