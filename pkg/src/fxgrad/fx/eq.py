"""32-band graphic equalizer built from fixed-center peaking biquads."""
from __future__ import annotations

import math
from typing import List, Mapping

import numpy as np
from scipy import signal

from .base import AudioFrame, BlackboxFx, ParamSpec
from .dynamics import db_to_amp

N_EQ_BANDS = 32
EQ_Q = 4.3
EQ_CENTERS = np.geomspace(40.0, 10240.0, N_EQ_BANDS)


def peaking_sos(fc: float, gain_db: float, q: float, sample_rate: float) -> np.ndarray:
    """Audio-EQ-cookbook peaking filter as one normalized sos row."""
    a_lin = 10.0 ** (gain_db / 40.0)
    w0 = 2.0 * math.pi * fc / sample_rate
    alpha = math.sin(w0) / (2.0 * q)
    cos_w0 = math.cos(w0)
    b = np.array([1.0 + alpha * a_lin, -2.0 * cos_w0, 1.0 - alpha * a_lin])
    a = np.array([1.0 + alpha / a_lin, -2.0 * cos_w0, 1.0 - alpha / a_lin])
    return np.concatenate([b / a[0], a / a[0]])


class GraphicEq(BlackboxFx):
    effect_id = "graphic_eq"

    def build_specs(self) -> List[ParamSpec]:
        specs = [
            ParamSpec(name=f"gain_{int(round(fc))}hz", unit="dB", phys_min=-24.0, phys_max=24.0)
            for fc in EQ_CENTERS
        ]
        specs.append(ParamSpec(name="output_gain", unit="dB", phys_min=-24.0, phys_max=24.0))
        return specs

    @property
    def band_names(self) -> List[str]:
        return [s.name for s in self.all_specs[:N_EQ_BANDS]]

    def _reset_state(self) -> None:
        self._zi = np.zeros((N_EQ_BANDS, 2))
        self._sos = None

    def _configure(self, params: Mapping[str, float]) -> None:
        self._sos = np.vstack([
            peaking_sos(fc, params[name], EQ_Q, self.sample_rate)
            for fc, name in zip(EQ_CENTERS, self.band_names)
        ])
        self._out_gain = float(db_to_amp(params["output_gain"]))

    def _process_block(self, block: AudioFrame, params: Mapping[str, float]) -> AudioFrame:
        y, self._zi = signal.sosfilt(self._sos, block, zi=self._zi)
        return y * self._out_gain


def graphic_eq_process(fx: GraphicEq, x: AudioFrame, theta) -> AudioFrame:
    return fx.process(x, theta)
