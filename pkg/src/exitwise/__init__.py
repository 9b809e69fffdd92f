"""exitwise: multi-exit domain adaptation with adversarial feature alignment,
cross-exit confidence self-training, and anytime/budgeted inference."""

__version__ = "0.1.0"

from .cascade import CascadeConfig, MultiExitNet, PredictionPanel, forward_all
from .checkpoint import load_checkpoint, save_checkpoint
from .data import BatchPlan, DomainSet, gen_blobs_shift, gen_two_moons_shift
from .inference import calibrate_budget, dynamic_forward, eval_anytime, eval_budget_curve
from .selftrain import (
    SelfTrainSet,
    assign_exits,
    class_confidence,
    class_thresholds,
    confidence_scores,
    select_balanced,
    select_by_threshold,
)
from .train import TrainConfig, run_training, step1_warmup, step2_selftrain

__all__ = [
    "BatchPlan",
    "CascadeConfig",
    "DomainSet",
    "MultiExitNet",
    "PredictionPanel",
    "SelfTrainSet",
    "TrainConfig",
    "assign_exits",
    "calibrate_budget",
    "class_confidence",
    "class_thresholds",
    "confidence_scores",
    "dynamic_forward",
    "eval_anytime",
    "eval_budget_curve",
    "forward_all",
    "gen_blobs_shift",
    "gen_two_moons_shift",
    "load_checkpoint",
    "run_training",
    "save_checkpoint",
    "select_balanced",
    "select_by_threshold",
    "step1_warmup",
    "step2_selftrain",
]
