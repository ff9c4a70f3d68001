"""Perturbation settings and random sign vectors."""
from __future__ import annotations

from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..errors import DomainError

Estimator = Literal["spsa", "fd"]


class PerturbationConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    epsilon: float = Field(default=0.01, gt=0.0, lt=0.5, description="perturbation size in normalized units")
    rng_seed: int = Field(default=0, ge=0)
    estimator: Estimator = "spsa"


def slot_rng(seed: int, slot: int, step: int) -> np.random.Generator:
    """Independent stream per (seed, slot, step); scheduling order cannot change the draws."""
    return np.random.default_rng([int(seed), int(slot), int(step)])


def sample_perturbation(n_params: int, rng: np.random.Generator) -> np.ndarray:
    """I.i.d. +/-1 entries with probability 0.5 each."""
    if n_params < 1:
        raise DomainError(f"need at least one parameter, got {n_params}")
    return rng.integers(0, 2, size=n_params).astype(np.float64) * 2.0 - 1.0
