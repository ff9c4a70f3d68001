"""Delay-invariant frame loss."""
from .delay_invariant import (
    DelayAlignment,
    LossBreakdown,
    LossConfig,
    align,
    estimate_delay,
    freq_loss,
    shift_frame,
    spectral_terms,
    time_loss,
    total_loss,
)

__all__ = [
    "DelayAlignment",
    "LossBreakdown",
    "LossConfig",
    "align",
    "estimate_delay",
    "freq_loss",
    "shift_frame",
    "spectral_terms",
    "time_loss",
    "total_loss",
]
