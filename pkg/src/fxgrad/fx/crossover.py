"""
Four-band Linkwitz-Riley crossover.

Each split is a 4th-order LR pair (two cascaded 2nd-order Butterworth
sections per branch). The tree splits at the middle frequency first and
compensates each branch with an allpass at the split it does not see, so
the four bands sum to AP(f1)·AP(f2)·AP(f3)·x: flat magnitude, rotated phase.
"""
from __future__ import annotations

from typing import List, Sequence, Tuple

import numpy as np
from scipy import signal

from .base import AudioFrame

N_BANDS = 4
MIN_SPLIT_HZ = 20.0


def lr4_sos(fc: float, btype: str, sample_rate: float) -> np.ndarray:
    sos = signal.butter(2, fc, btype=btype, fs=sample_rate, output="sos")
    return np.vstack([sos, sos])


def order_splits(freqs: Sequence[float], sample_rate: float) -> List[float]:
    """Sort ascending, nudge ties up by 1 Hz, keep inside (20 Hz, Nyquist)."""
    nyquist = sample_rate / 2.0
    out = sorted(float(f) for f in freqs)
    for i in range(len(out)):
        out[i] = min(max(out[i], MIN_SPLIT_HZ + 1.0), nyquist * 0.95)
        if i and out[i] <= out[i - 1]:
            out[i] = out[i - 1] + 1.0
    return out


class _Section:
    """One sos cascade with persistent state; coefficients can be swapped between calls."""

    def __init__(self) -> None:
        self.sos: np.ndarray | None = None
        self.zi = np.zeros((2, 2))

    def design(self, sos: np.ndarray) -> None:
        self.sos = sos

    def __call__(self, x: AudioFrame) -> AudioFrame:
        y, self.zi = signal.sosfilt(self.sos, x, zi=self.zi)
        return y


class _Split:
    def __init__(self) -> None:
        self.low = _Section()
        self.high = _Section()

    def design(self, fc: float, sample_rate: float) -> None:
        self.low.design(lr4_sos(fc, "lowpass", sample_rate))
        self.high.design(lr4_sos(fc, "highpass", sample_rate))

    def split(self, x: AudioFrame) -> Tuple[AudioFrame, AudioFrame]:
        return self.low(x), self.high(x)

    def allpass(self, x: AudioFrame) -> AudioFrame:
        return self.low(x) + self.high(x)


class CrossoverBank:
    def __init__(self, sample_rate: float):
        self.sample_rate = float(sample_rate)
        self.split_freqs: List[float] = []
        self.reset()

    def reset(self) -> None:
        self._mid = _Split()
        self._low_ap = _Split()   # allpass at the upper split, applied to the low branch
        self._low = _Split()
        self._high_ap = _Split()  # allpass at the lower split, applied to the high branch
        self._high = _Split()

    def configure(self, freqs: Sequence[float]) -> List[float]:
        f1, f2, f3 = order_splits(freqs, self.sample_rate)
        fs = self.sample_rate
        self._mid.design(f2, fs)
        self._low_ap.design(f3, fs)
        self._low.design(f1, fs)
        self._high_ap.design(f1, fs)
        self._high.design(f3, fs)
        self.split_freqs = [f1, f2, f3]
        return self.split_freqs

    def split(self, x: AudioFrame) -> List[AudioFrame]:
        if not self.split_freqs:
            raise RuntimeError("crossover used before configure()")
        lo, hi = self._mid.split(x)
        b1, b2 = self._low.split(self._low_ap.allpass(lo))
        b3, b4 = self._high.split(self._high_ap.allpass(hi))
        return [b1, b2, b3, b4]
