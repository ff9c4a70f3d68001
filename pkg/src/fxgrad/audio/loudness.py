"""Level measurement, normalization and pair alignment.

dBFS means RMS level relative to digital full scale, so a full-scale sine
sits at -3.01 dBFS.
"""
from __future__ import annotations

import logging
from typing import Tuple

import numpy as np

from ..errors import DomainError
from ..loss.delay_invariant import align, estimate_delay
from .wav import AudioClip

logger = logging.getLogger(__name__)


def rms_dbfs(samples) -> float:
    x = np.asarray(samples, dtype=np.float64)
    rms = float(np.sqrt(np.mean(x * x))) if x.size else 0.0
    return 20.0 * np.log10(rms) if rms > 0.0 else float("-inf")


def peak_dbfs(samples) -> float:
    peak = float(np.max(np.abs(samples))) if np.size(samples) else 0.0
    return 20.0 * np.log10(peak) if peak > 0.0 else float("-inf")


def _scaled(clip: AudioClip, gain_db: float) -> AudioClip:
    return AudioClip(samples=clip.samples * 10.0 ** (gain_db / 20.0), sample_rate=clip.sample_rate, source_id=clip.source_id)


def loudness_normalize(clip: AudioClip, target_dbfs: float = -25.0) -> AudioClip:
    level = rms_dbfs(clip.samples)
    if not np.isfinite(level):
        raise DomainError(f"cannot normalize silent clip {clip.source_id!r}")
    return _scaled(clip, target_dbfs - level)


def peak_normalize(clip: AudioClip, target_dbfs: float = -1.0) -> AudioClip:
    level = peak_dbfs(clip.samples)
    if not np.isfinite(level):
        raise DomainError(f"cannot normalize silent clip {clip.source_id!r}")
    return _scaled(clip, target_dbfs - level)


def align_pair(inp: AudioClip, target: AudioClip, maxlag: int = 2048) -> Tuple[AudioClip, AudioClip]:
    """Trim both clips so the target's best cross-correlation lag becomes zero."""
    n = min(len(inp), len(target))
    a, b = inp.samples[:n], target.samples[:n]
    lag = estimate_delay(b, a, min(maxlag, (n - 1) // 2))
    b_al, a_al = align(b, a, lag)
    if lag.tau:
        logger.info("aligned %s: target offset %+d samples", inp.source_id, lag.tau)
    return (
        AudioClip(samples=a_al, sample_rate=inp.sample_rate, source_id=inp.source_id),
        AudioClip(samples=b_al, sample_rate=target.sample_rate, source_id=target.source_id),
    )
