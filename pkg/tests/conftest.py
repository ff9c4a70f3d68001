from typing import List, Mapping

import numpy as np
import pytest

from fxgrad.fx.base import AudioFrame, BlackboxFx, FrameConfig, ParamSpec


class RecordingFx(BlackboxFx):
    """Identity effect that keeps every sample it was fed, in order."""

    effect_id = "recording"

    def build_specs(self) -> List[ParamSpec]:
        return [ParamSpec(name="unused", phys_min=0.0, phys_max=1.0)]

    def _reset_state(self) -> None:
        self.stream: List[float] = []
        self.thetas: List[float] = []

    def _process_block(self, block: AudioFrame, params: Mapping[str, float]) -> AudioFrame:
        self.stream.extend(block.tolist())
        self.thetas.append(params["unused"])
        return block.copy()


class LinearMixFx(BlackboxFx):
    """y[n] = sum_i theta_i * x[n - i]: linear in theta and stateful across frames."""

    effect_id = "linear_mix"
    n_taps = 4

    def build_specs(self) -> List[ParamSpec]:
        return [ParamSpec(name=f"tap_{i}", phys_min=0.0, phys_max=1.0) for i in range(self.n_taps)]

    def _reset_state(self) -> None:
        self._hist = np.zeros(self.n_taps)

    def _process_block(self, block: AudioFrame, params: Mapping[str, float]) -> AudioFrame:
        padded = np.concatenate([self._hist, block])
        out = np.zeros_like(block)
        n = block.shape[0]
        for i in range(self.n_taps):
            out += params[f"tap_{i}"] * padded[self.n_taps - i:self.n_taps - i + n]
        self._hist = padded[-self.n_taps:]
        return out


class CallCounter:
    def __init__(self):
        self.calls = 0


def counting_factory(base_cls, counter: CallCounter, **kwargs):
    """Factory whose instances bump ``counter.calls`` on every ``process``."""

    class Counted(base_cls):
        def process(self, x, theta):
            counter.calls += 1
            return super().process(x, theta)

    return lambda: Counted(**kwargs)


def linear_mix_factory(n_taps: int, block_size: int = 64):
    cls = type(f"LinearMix{n_taps}", (LinearMixFx,), {"n_taps": n_taps})
    return lambda: cls(block_size=block_size)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_frame():
    return FrameConfig(frame_size=256, context_size=1024, sample_rate=22050, block_size=64)
