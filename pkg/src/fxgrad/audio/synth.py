"""Deterministic synthetic source material: tones, chirps, noise bursts and plucks."""
from __future__ import annotations

from typing import List, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import signal

from .wav import AudioClip

SourceKind = Literal["tones", "chirps", "noise-bursts", "plucks"]
_KIND_CODES = {"tones": 1, "chirps": 2, "noise-bursts": 3, "plucks": 4}


class SourceSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: SourceKind = "plucks"
    count: int = Field(default=8, ge=1)
    duration_s: float = Field(default=4.0, gt=0.0)
    f_min: float = Field(default=80.0, gt=0.0)
    f_max: float = Field(default=4000.0, gt=0.0)

    @model_validator(mode="after")
    def _range(self) -> "SourceSpec":
        if self.f_max <= self.f_min:
            raise ValueError("f_max must exceed f_min")
        return self


def _harmonic_tone(t: np.ndarray, f0: float, n_harm: int, rolloff: float, sample_rate: int, rng) -> np.ndarray:
    out = np.zeros_like(t)
    for h in range(1, n_harm + 1):
        if h * f0 >= 0.45 * sample_rate:
            break
        out += rolloff ** (h - 1) * np.sin(2.0 * np.pi * h * f0 * t + rng.uniform(0.0, 2.0 * np.pi))
    return out / max(np.max(np.abs(out)), 1e-12)


def pluck(f0: float, duration_s: float, sample_rate: int, decay_s: float = 0.4, onset_s: float = 0.05,
          rng: np.random.Generator | None = None) -> np.ndarray:
    """Exponentially decaying harmonic note, silent before ``onset_s``."""
    rng = rng or np.random.default_rng(0)
    n = int(round(duration_s * sample_rate))
    t = np.arange(n) / sample_rate
    env = np.where(t >= onset_s, np.exp(-(t - onset_s) / decay_s), 0.0)
    return env * _harmonic_tone(t, f0, 12, 0.7, sample_rate, rng)


def chirp_clip(f_start: float, f_end: float, duration_s: float, sample_rate: int) -> np.ndarray:
    n = int(round(duration_s * sample_rate))
    t = np.arange(n) / sample_rate
    return signal.chirp(t, f0=f_start, t1=t[-1] if n > 1 else duration_s, f1=f_end, method="logarithmic")


def _noise_bursts(n: int, sample_rate: int, f_lo: float, f_hi: float, rng) -> np.ndarray:
    sos = signal.butter(4, [f_lo, min(f_hi, 0.45 * sample_rate)], btype="bandpass", fs=sample_rate, output="sos")
    noise = signal.sosfilt(sos, rng.standard_normal(n))
    gate = np.zeros(n)
    pos = 0
    while pos < n:
        length = int(rng.uniform(0.05, 0.4) * sample_rate)
        gap = int(rng.uniform(0.05, 0.3) * sample_rate)
        seg = np.hanning(length) if length > 1 else np.ones(max(length, 1))
        gate[pos:pos + length] = seg[: max(0, min(length, n - pos))] * rng.uniform(0.2, 1.0)
        pos += length + gap
    out = noise * gate
    return out / max(np.max(np.abs(out)), 1e-12)


def synth_sources(spec: SourceSpec, seed: int, sample_rate: int = 22050) -> List[AudioClip]:
    n = int(round(spec.duration_s * sample_rate))
    clips: List[AudioClip] = []
    log_lo, log_hi = np.log(spec.f_min), np.log(spec.f_max)
    for i in range(spec.count):
        rng = np.random.default_rng([int(seed), i, _KIND_CODES[spec.kind]])
        level = rng.uniform(0.3, 0.9)
        if spec.kind == "plucks":
            f0 = float(np.exp(rng.uniform(log_lo, min(log_hi, np.log(1000.0)))))
            x = pluck(f0, spec.duration_s, sample_rate, decay_s=rng.uniform(0.2, 1.2), rng=rng)
        elif spec.kind == "tones":
            t = np.arange(n) / sample_rate
            f0 = float(np.exp(rng.uniform(log_lo, log_hi)))
            attack = rng.uniform(0.01, 0.3)
            env = np.minimum(1.0, t / attack) * (0.6 + 0.4 * np.cos(2 * np.pi * rng.uniform(0.2, 2.0) * t))
            x = env * _harmonic_tone(t, f0, 6, 0.5, sample_rate, rng)
        elif spec.kind == "chirps":
            x = chirp_clip(spec.f_min, spec.f_max, spec.duration_s, sample_rate)
            if rng.integers(2):
                x = x[::-1].copy()
        else:
            x = _noise_bursts(n, sample_rate, spec.f_min, spec.f_max, rng)
        clips.append(AudioClip(samples=level * x, sample_rate=sample_rate, source_id=f"{spec.kind}-{i:04d}"))
    return clips
