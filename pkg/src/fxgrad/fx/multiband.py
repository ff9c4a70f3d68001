"""
Multiband compressor (21 parameters) and multiband noise gate (17 parameters).

Signal path: input gain -> 4-band crossover -> per-band peak envelope and
static gain -> band sum -> output gain. Attack and release are held at the
10 ms minimum and are not trainable.
"""
from __future__ import annotations

from typing import List, Mapping

import numpy as np

from .base import AudioFrame, BlackboxFx, ParamSpec
from .crossover import N_BANDS, CrossoverBank
from .dynamics import (
    DETECTOR_MS,
    EnvelopeState,
    amp_to_db,
    compressor_static_gain,
    db_to_amp,
    envelope_follow,
    gate_static_gain,
)

SPLIT_MIN_HZ = 40.0
SPLIT_MAX_HZ = 10000.0
DEFAULT_SPLITS = (200.0, 1000.0, 5000.0)


def _split_specs() -> List[ParamSpec]:
    return [
        ParamSpec(name=f"split_{i}", unit="Hz", phys_min=SPLIT_MIN_HZ, phys_max=SPLIT_MAX_HZ, mapping="logarithmic")
        for i in range(1, N_BANDS)
    ]


def _io_gain_specs() -> List[ParamSpec]:
    return [
        ParamSpec(name="input_gain", unit="dB", phys_min=-24.0, phys_max=24.0),
        ParamSpec(name="output_gain", unit="dB", phys_min=-24.0, phys_max=24.0),
    ]


class _MultibandBase(BlackboxFx):
    def _reset_state(self) -> None:
        self._xover = CrossoverBank(self.sample_rate)
        self._env = [EnvelopeState() for _ in range(N_BANDS)]

    def _configure(self, params: Mapping[str, float]) -> None:
        self._xover.configure([params[f"split_{i}"] for i in range(1, N_BANDS)])

    def _band_gain_db(self, band: int, level_db: np.ndarray, params: Mapping[str, float]) -> np.ndarray:
        raise NotImplementedError

    def _process_block(self, block: AudioFrame, params: Mapping[str, float]) -> AudioFrame:
        x = block * db_to_amp(params["input_gain"])
        out = np.zeros_like(x)
        for b, band in enumerate(self._xover.split(x), start=1):
            env = envelope_follow(self._env[b - 1], band, DETECTOR_MS, DETECTOR_MS, self.sample_rate)
            out += band * db_to_amp(self._band_gain_db(b, amp_to_db(env), params))
        return out * db_to_amp(params["output_gain"])


class MultibandCompressor(_MultibandBase):
    effect_id = "multiband_compressor"

    def build_specs(self) -> List[ParamSpec]:
        specs: List[ParamSpec] = []
        for b in range(1, N_BANDS + 1):
            specs += [
                ParamSpec(name=f"threshold_{b}", unit="dBFS", phys_min=-60.0, phys_max=0.0),
                ParamSpec(name=f"makeup_{b}", unit="dB", phys_min=-24.0, phys_max=24.0),
                ParamSpec(name=f"ratio_{b}", unit="", phys_min=1.0, phys_max=20.0),
                ParamSpec(name=f"knee_{b}", unit="dB", phys_min=0.0, phys_max=12.0),
            ]
        return specs + _split_specs() + _io_gain_specs()

    def _band_gain_db(self, band, level_db, params):
        gain = compressor_static_gain(
            level_db, params[f"threshold_{band}"], params[f"ratio_{band}"], params[f"knee_{band}"]
        )
        return gain + params[f"makeup_{band}"]


class MultibandGate(_MultibandBase):
    effect_id = "multiband_gate"

    def build_specs(self) -> List[ParamSpec]:
        specs: List[ParamSpec] = []
        for b in range(1, N_BANDS + 1):
            specs += [
                ParamSpec(name=f"threshold_{b}", unit="dBFS", phys_min=-60.0, phys_max=0.0),
                ParamSpec(name=f"reduction_{b}", unit="dB", phys_min=-80.0, phys_max=0.0),
                ParamSpec(name=f"ratio_{b}", unit="", phys_min=1.0, phys_max=20.0),
            ]
        return specs + _split_specs() + _io_gain_specs()

    def _band_gain_db(self, band, level_db, params):
        return gate_static_gain(
            level_db, params[f"threshold_{band}"], params[f"ratio_{band}"], params[f"reduction_{band}"]
        )


# knees and output gain held fixed: 16 trainable parameters inside the mastering chain
MASTERING_COMPRESSOR_FIXED = {**{f"knee_{b}": 6.0 for b in range(1, N_BANDS + 1)}, "output_gain": 0.0}


def multiband_compressor_process(fx: MultibandCompressor, x: AudioFrame, theta) -> AudioFrame:
    return fx.process(x, theta)


def multiband_gate_process(fx: MultibandGate, x: AudioFrame, theta) -> AudioFrame:
    return fx.process(x, theta)
