"""Gradient estimation through black-box effects."""
from .check import GradCheckResult, analytic_vjp_check, spsa_pattern_mean
from .estimators import (
    FdTape,
    GradientTape,
    SpsaTape,
    estimate_forward,
    fd_forward,
    fd_vjp,
    replica_pairs_for,
    spsa_forward,
    spsa_vjp,
)
from .perturbation import PerturbationConfig, sample_perturbation, slot_rng

__all__ = [
    "FdTape",
    "GradCheckResult",
    "GradientTape",
    "PerturbationConfig",
    "SpsaTape",
    "analytic_vjp_check",
    "estimate_forward",
    "fd_forward",
    "fd_vjp",
    "replica_pairs_for",
    "sample_perturbation",
    "slot_rng",
    "spsa_forward",
    "spsa_pattern_mean",
    "spsa_vjp",
]
