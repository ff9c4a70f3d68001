"""Log-mel front-end (non-trainable) and the shared mel filter bank."""
from __future__ import annotations

from functools import lru_cache
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import signal

from ..errors import ContractError


class MelFrontendConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    window: int = Field(default=1024, ge=16, description="STFT window, samples (~46 ms at 22050 Hz)")
    overlap: float = Field(default=0.25, ge=0.0, lt=1.0, description="fraction of the window shared by neighbors")
    n_mels: int = Field(default=128, ge=1)
    fmin: float = Field(default=20.0, ge=0.0)
    fmax: Optional[float] = Field(default=None, description="defaults to Nyquist")
    log_offset: float = Field(default=1e-6, gt=0.0)

    @property
    def hop(self) -> int:
        return self.window - int(round(self.overlap * self.window))

    def n_frames(self, n_samples: int) -> int:
        return (n_samples - self.window) // self.hop + 1

    @model_validator(mode="after")
    def _check(self) -> "MelFrontendConfig":
        if self.fmax is not None and self.fmax <= self.fmin:
            raise ValueError("fmax must be above fmin")
        return self


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@lru_cache(maxsize=16)
def mel_filterbank(n_mels: int, n_fft: int, sample_rate: float, fmin: float, fmax: float) -> np.ndarray:
    """Area-normalized triangles, shape (n_mels, n_fft // 2 + 1)."""
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    bins = np.fft.rfftfreq(n_fft, d=1.0 / sample_rate)
    lower, center, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (bins[None, :] - lower) / (center - lower)
    falling = (upper - bins[None, :]) / (upper - center)
    fb = np.maximum(0.0, np.minimum(rising, falling))
    fb *= (2.0 / (upper - lower))
    fb.setflags(write=False)
    return fb


def mel_centers(n_mels: int, sample_rate: float, fmin: float, fmax: float) -> np.ndarray:
    return mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))[1:-1]


def power_frames(x: np.ndarray, window: int, hop: int) -> np.ndarray:
    """Hann-windowed power spectra of every full frame, shape (..., T, window // 2 + 1)."""
    frames = sliding_window_view(x, window, axis=-1)[..., ::hop, :]
    spec = np.fft.rfft(frames * signal.get_window("hann", window), axis=-1)
    return spec.real ** 2 + spec.imag ** 2


def melspec(x_ctx, cfg: MelFrontendConfig, sample_rate: float) -> np.ndarray:
    """Log-mel features of one context (C,) or a batch (M, C) -> (..., T, n_mels)."""
    x = np.asarray(x_ctx, dtype=np.float64)
    if x.shape[-1] < cfg.window:
        raise ContractError(f"context of {x.shape[-1]} samples is shorter than the {cfg.window}-sample window")
    fb = mel_filterbank(cfg.n_mels, cfg.window, float(sample_rate), cfg.fmin, cfg.fmax or sample_rate / 2.0)
    mel = power_frames(x, cfg.window, cfg.hop) @ fb.T
    return np.log(mel + cfg.log_offset)
