"""
Dynamics building blocks: static gain curves, envelope detection, and the
single-band compressor and limiter effects.

Levels and gains are in dB; envelopes are linear amplitudes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Mapping

import numpy as np
from scipy import signal

from ..errors import DomainError
from .base import AudioFrame, BlackboxFx, ParamSpec

LEVEL_FLOOR = 1e-10
DETECTOR_MS = 10.0


def coeff_exponential(ms: float, sample_rate: float) -> float:
    return math.exp(-1.0 / (ms * sample_rate / 1000.0))


def amp_to_db(x):
    return 20.0 * np.log10(np.maximum(np.abs(x), LEVEL_FLOOR))


def db_to_amp(db):
    return np.power(10.0, np.asarray(db, dtype=np.float64) / 20.0)


def compressor_static_gain(level, threshold: float, ratio: float, knee: float):
    """Soft-knee compressor curve; returns G(L) - L in dB (zero or negative)."""
    if ratio < 1.0:
        raise DomainError(f"compressor ratio must be >= 1, got {ratio}")
    if knee < 0.0:
        raise DomainError(f"knee width must be >= 0, got {knee}")
    L = np.asarray(level, dtype=np.float64)
    over = L - threshold
    slope = 1.0 / ratio - 1.0
    gain = np.where(over > 0.0, slope * over, 0.0)
    if knee > 0.0:
        in_knee = np.abs(2.0 * over) <= knee
        knee_gain = slope * (over + knee / 2.0) ** 2 / (2.0 * knee)
        gain = np.where(in_knee, knee_gain, np.where(2.0 * over > knee, slope * over, 0.0))
    return gain if gain.ndim else float(gain)


def gate_static_gain(level, threshold: float, ratio: float, reduction: float):
    """Downward expander below threshold, floored at the reduction gain."""
    if ratio < 1.0:
        raise DomainError(f"gate ratio must be >= 1, got {ratio}")
    L = np.asarray(level, dtype=np.float64)
    floor = -abs(reduction)
    expanded = (L - threshold) * (ratio - 1.0)
    gain = np.where(L >= threshold, 0.0, np.maximum(expanded, floor))
    return gain if gain.ndim else float(gain)


@dataclass
class EnvelopeState:
    value: float = 0.0


def envelope_follow(
    state: EnvelopeState,
    x: AudioFrame,
    attack_ms: float,
    release_ms: float,
    sample_rate: float,
) -> AudioFrame:
    """One-pole peak detector on |x|; attack coefficient while rising."""
    if attack_ms <= 0 or release_ms <= 0:
        raise DomainError("attack and release must be > 0 ms")
    rect = np.abs(np.asarray(x, dtype=np.float64))
    a_att = coeff_exponential(attack_ms, sample_rate)
    a_rel = coeff_exponential(release_ms, sample_rate)
    if a_att == a_rel:
        env, zf = signal.lfilter([1.0 - a_att], [1.0, -a_att], rect, zi=[a_att * state.value])
        state.value = float(env[-1]) if env.size else state.value
        return env
    env = np.empty_like(rect)
    prev = state.value
    for i, r in enumerate(rect):
        a = a_att if r > prev else a_rel
        prev = a * prev + (1.0 - a) * r
        env[i] = prev
    state.value = prev
    return env


def peak_hold_follow(state: EnvelopeState, x: AudioFrame, release_ms: float, sample_rate: float) -> AudioFrame:
    """Instant-attack detector: never below |x|, releases with a one-pole decay."""
    rect = np.abs(np.asarray(x, dtype=np.float64))
    a = coeff_exponential(release_ms, sample_rate)
    env = np.empty_like(rect)
    prev = state.value
    for i, r in enumerate(rect):
        prev = r if r >= prev else a * prev + (1.0 - a) * r
        env[i] = prev
    state.value = prev
    return env


class Compressor(BlackboxFx):
    """Broadband feed-forward compressor with a peak detector."""

    effect_id = "compressor"

    def build_specs(self) -> List[ParamSpec]:
        return [
            ParamSpec(name="threshold", unit="dBFS", phys_min=-60.0, phys_max=0.0),
            ParamSpec(name="ratio", unit="", phys_min=1.0, phys_max=20.0),
            ParamSpec(name="knee", unit="dB", phys_min=0.0, phys_max=12.0),
            ParamSpec(name="makeup", unit="dB", phys_min=-24.0, phys_max=24.0),
        ]

    def _reset_state(self) -> None:
        self._env = EnvelopeState()

    def _process_block(self, block: AudioFrame, params: Mapping[str, float]) -> AudioFrame:
        env = envelope_follow(self._env, block, DETECTOR_MS, DETECTOR_MS, self.sample_rate)
        gain = compressor_static_gain(amp_to_db(env), params["threshold"], params["ratio"], params["knee"])
        return block * db_to_amp(gain + params["makeup"])


class Limiter(BlackboxFx):
    """Infinite-ratio compressor: the detected level is clamped to the threshold."""

    effect_id = "limiter"

    def build_specs(self) -> List[ParamSpec]:
        return [ParamSpec(name="threshold", unit="dBFS", phys_min=-60.0, phys_max=0.0)]

    def _reset_state(self) -> None:
        self._env = EnvelopeState()

    def _process_block(self, block: AudioFrame, params: Mapping[str, float]) -> AudioFrame:
        env = peak_hold_follow(self._env, block, DETECTOR_MS, self.sample_rate)
        gain = np.minimum(0.0, params["threshold"] - amp_to_db(env))
        return block * db_to_amp(gain)


def limiter_process(fx: Limiter, x: AudioFrame, theta) -> AudioFrame:
    return fx.process(x, theta)
