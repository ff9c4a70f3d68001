"""Stateful minibatch training, optimization and offline rendering."""
from .optim import Adam, AdamState, adam_update
from .progress import Phase, ProgressReporter, RunState, RunView
from .render import RenderResult, SmootherConfig, predict_thetas, render, smooth_trajectory
from .schedule import BatchSlot, ClipPair, SlotBatch, build_slots, context_window, frame_contexts, schedule_step
from .trainer import StepSummary, Trainer, TrainerConfig, TrainingResult, run_training, training_meta

__all__ = [
    "Adam",
    "AdamState",
    "BatchSlot",
    "ClipPair",
    "Phase",
    "ProgressReporter",
    "RenderResult",
    "RunState",
    "RunView",
    "SlotBatch",
    "SmootherConfig",
    "StepSummary",
    "Trainer",
    "TrainerConfig",
    "TrainingResult",
    "adam_update",
    "build_slots",
    "context_window",
    "frame_contexts",
    "predict_thetas",
    "render",
    "run_training",
    "schedule_step",
    "smooth_trajectory",
    "training_meta",
]
