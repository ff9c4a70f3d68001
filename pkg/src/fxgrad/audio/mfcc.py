"""MFCC features and the mean cosine distance between two clips."""
from __future__ import annotations

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import fft

from ..encoder.melspec import mel_filterbank, power_frames

POWER_FLOOR = 1e-10


class MfccConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_mfcc: int = Field(default=13, ge=1)
    window: int = Field(default=1024, ge=16)
    hop: int = Field(default=256, ge=1)
    n_mels: int = Field(default=128, ge=1)
    fmin: float = Field(default=0.0, ge=0.0)
    silence_power: float = Field(default=1e-12, ge=0.0, description="frame energy at or below which a frame is silent")

    @model_validator(mode="after")
    def _coeffs(self) -> "MfccConfig":
        if self.n_mfcc > self.n_mels:
            raise ValueError("n_mfcc must not exceed n_mels")
        return self


def _frames(x: np.ndarray, cfg: MfccConfig) -> np.ndarray:
    if x.shape[0] < cfg.window:
        x = np.pad(x, (0, cfg.window - x.shape[0]))
    return power_frames(x, cfg.window, cfg.hop)


def _cepstra(power: np.ndarray, cfg: MfccConfig, sample_rate: float) -> np.ndarray:
    fb = mel_filterbank(cfg.n_mels, cfg.window, float(sample_rate), cfg.fmin, sample_rate / 2.0)
    log_mel = 10.0 * np.log10(np.maximum(power @ fb.T, POWER_FLOOR))
    return fft.dct(log_mel, type=2, norm="ortho", axis=-1)[..., : cfg.n_mfcc]


def mfcc(samples, cfg: MfccConfig | None = None, sample_rate: float = 22050) -> np.ndarray:
    """Per-frame MFCCs (c0 included), shape (T, n_mfcc)."""
    cfg = cfg or MfccConfig()
    return _cepstra(_frames(np.asarray(samples, dtype=np.float64), cfg), cfg, sample_rate)


def mfcc_distance(a, b, cfg: MfccConfig | None = None, sample_rate: float = 22050) -> float:
    """Mean over frames of 1 - cos(mfcc_a, mfcc_b).

    The shorter clip is zero-padded. Frames silent in both clips are skipped;
    if every frame is skipped the distance is 0.
    """
    cfg = cfg or MfccConfig()
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    n = max(x.shape[0], y.shape[0])
    x, y = np.pad(x, (0, n - x.shape[0])), np.pad(y, (0, n - y.shape[0]))
    px, py = _frames(x, cfg), _frames(y, cfg)
    keep = (px.sum(axis=-1) > cfg.silence_power) | (py.sum(axis=-1) > cfg.silence_power)
    if not np.any(keep):
        return 0.0
    cx, cy = _cepstra(px[keep], cfg, sample_rate), _cepstra(py[keep], cfg, sample_rate)
    denom = np.linalg.norm(cx, axis=-1) * np.linalg.norm(cy, axis=-1)
    cos = np.einsum("tk,tk->t", cx, cy) / np.maximum(denom, 1e-300)
    return float(np.mean(1.0 - np.clip(cos, -1.0, 1.0)))
