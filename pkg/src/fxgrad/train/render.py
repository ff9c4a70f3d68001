"""Offline inference: per-frame parameters, trajectory smoothing and rendering."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..encoder.melspec import MelFrontendConfig, melspec
from ..encoder.network import EncoderWeights, encoder_forward
from ..errors import ContractError
from ..fx.base import FrameConfig, apply_trajectory
from ..fx.factory import EffectConfig, create_effect
from ..telemetry import trace
from .schedule import frame_contexts

logger = logging.getLogger(__name__)

PREDICT_BATCH = 32


class SmootherConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    coefficient: float = Field(default=0.9, ge=0.0, lt=1.0, description="one-pole retain factor for theta_hat")


@dataclass
class RenderResult:
    audio: np.ndarray
    thetas: np.ndarray       # smoothed, as applied
    raw_thetas: np.ndarray


def smooth_trajectory(thetas: np.ndarray, coefficient: float) -> np.ndarray:
    """s[0] = t[0]; s[k] = a * s[k-1] + (1 - a) * t[k]."""
    thetas = np.asarray(thetas, dtype=np.float64)
    if coefficient == 0.0 or thetas.shape[0] == 0:
        return thetas.copy()
    out = np.empty_like(thetas)
    out[0] = thetas[0]
    for k in range(1, thetas.shape[0]):
        out[k] = coefficient * out[k - 1] + (1.0 - coefficient) * thetas[k]
    return out


def predict_thetas(
    weights: EncoderWeights,
    signal: np.ndarray,
    frame: FrameConfig,
    mel: MelFrontendConfig,
) -> np.ndarray:
    """Eval-mode encoder output for every full frame of ``signal``: (n_frames, P)."""
    contexts = frame_contexts(signal, frame.frame_size, frame.context_size)
    rows = []
    for start in range(0, contexts.shape[0], PREDICT_BATCH):
        feats = melspec(contexts[start:start + PREDICT_BATCH], mel, frame.sample_rate)
        theta, _ = encoder_forward(weights, feats, mode="eval")
        rows.append(theta)
    return np.concatenate(rows, axis=0) if rows else np.zeros((0, weights.n_outputs))


@trace("render")
def render(
    weights: EncoderWeights,
    clip: np.ndarray,
    effect: EffectConfig,
    frame: FrameConfig,
    mel: MelFrontendConfig,
    smoother: Optional[SmootherConfig] = None,
    sample_rate: Optional[int] = None,
) -> RenderResult:
    """Process ``clip`` with one fresh effect instance driven by the encoder.

    The clip is zero-padded to whole frames and the output trimmed back to the
    input length.
    """
    if sample_rate is not None and sample_rate != frame.sample_rate:
        raise ContractError(f"clip sample rate {sample_rate} Hz does not match the model's {frame.sample_rate} Hz")
    audio = np.asarray(clip, dtype=np.float64)
    if audio.ndim != 1 or audio.shape[0] == 0:
        raise ContractError("render needs a non-empty mono clip")
    n = frame.frame_size
    n_frames = -(-audio.shape[0] // n)
    padded = np.zeros(n_frames * n)
    padded[:audio.shape[0]] = audio

    raw = predict_thetas(weights, padded, frame, mel)
    coeff = (smoother or SmootherConfig()).coefficient
    thetas = np.clip(smooth_trajectory(raw, coeff), 0.0, 1.0)
    fx = create_effect(effect, frame, track=False)
    out = apply_trajectory(fx, padded, thetas, n)[:audio.shape[0]]
    logger.debug("rendered %d frames with %s", n_frames, fx)
    return RenderResult(audio=out, thetas=thetas, raw_thetas=raw)
