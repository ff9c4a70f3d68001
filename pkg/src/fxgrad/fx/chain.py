"""Serial effect chain; the parameter vector is the concatenation of the children's."""
from __future__ import annotations

from typing import List, Mapping, Sequence

import numpy as np

from ..errors import ContractError
from . import registry
from .base import AudioFrame, BlackboxFx, ParamSpec, _as_frame, as_param_vector


class FxChain(BlackboxFx):
    effect_id = "chain"

    def __init__(self, children: Sequence[BlackboxFx], sample_rate: int = 22050, block_size: int = 256):
        if not children:
            raise ContractError("a chain needs at least one effect")
        self.children: List[BlackboxFx] = list(children)
        # fixed values and overrides belong to the children
        super().__init__(sample_rate=sample_rate, block_size=block_size)
        self.latency = sum(c.latency for c in self.children)
        bounds = np.cumsum([0] + [c.n_params for c in self.children])
        self._slices = [slice(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]

    def build_specs(self) -> List[ParamSpec]:
        ids = [c.effect_id for c in self.children]
        specs: List[ParamSpec] = []
        for i, child in enumerate(self.children):
            prefix = child.effect_id if ids.count(child.effect_id) == 1 else f"{child.effect_id}{i}"
            specs += [s.model_copy(update={"name": f"{prefix}.{s.name}"}) for s in child.param_specs]
        return specs

    def _reset_state(self) -> None:
        for child in self.children:
            child.reset()

    def _process_block(self, block: AudioFrame, params: Mapping[str, float]) -> AudioFrame:
        raise NotImplementedError("chains route whole frames through their children")

    def split_theta(self, theta: Sequence[float]) -> List[np.ndarray]:
        vec = as_param_vector(theta, self.n_params)
        return [vec[sl] for sl in self._slices]

    def process(self, x: Sequence[float], theta: Sequence[float]) -> AudioFrame:
        y = _as_frame(x, self.block_size)
        for child, part in zip(self.children, self.split_theta(theta)):
            y = child.process(y, part)
        registry.record_process(self, y.shape[0])
        return y


def chain_process(fx: FxChain, x: AudioFrame, theta) -> AudioFrame:
    return fx.process(x, theta)
