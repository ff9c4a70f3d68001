"""
Small effects with known behavior: identity, gain, soft clip, a quadratic
probe and a stateful one-pole smoother.

The differentiable ones expose ``analytic_vjp(x, theta, v)``: the exact
gradient of sum(v * process(x, theta)) with respect to the normalized
parameters, evaluated from the current state without advancing it.
"""
from __future__ import annotations

from typing import List, Mapping, Sequence

import numpy as np

from .base import AudioFrame, BlackboxFx, ParamSpec, ParamVector, as_param_vector


def _width(spec: ParamSpec) -> float:
    return spec.phys_max - spec.phys_min


class IdentityFx(BlackboxFx):
    effect_id = "identity"

    def build_specs(self) -> List[ParamSpec]:
        return [ParamSpec(name="unused", phys_min=0.0, phys_max=1.0)]

    def _reset_state(self) -> None:
        pass

    def _process_block(self, block: AudioFrame, params: Mapping[str, float]) -> AudioFrame:
        return block.copy()


class GainFx(BlackboxFx):
    effect_id = "gain"

    def build_specs(self) -> List[ParamSpec]:
        return [ParamSpec(name="gain", unit="x", phys_min=0.0, phys_max=1.0)]

    def _reset_state(self) -> None:
        pass

    def _process_block(self, block: AudioFrame, params: Mapping[str, float]) -> AudioFrame:
        return params["gain"] * block

    def analytic_vjp(self, x: Sequence[float], theta: Sequence[float], v: Sequence[float]) -> ParamVector:
        as_param_vector(theta, self.n_params)
        grads = [float(np.dot(v, x)) * _width(s) for s in self.param_specs]
        return np.array(grads)


class SoftClipFx(BlackboxFx):
    """level * tanh(drive * x)."""

    effect_id = "soft_clip"

    def build_specs(self) -> List[ParamSpec]:
        return [
            ParamSpec(name="drive", unit="x", phys_min=0.1, phys_max=4.0),
            ParamSpec(name="level", unit="x", phys_min=0.0, phys_max=2.0),
        ]

    def _reset_state(self) -> None:
        pass

    def _process_block(self, block: AudioFrame, params: Mapping[str, float]) -> AudioFrame:
        return params["level"] * np.tanh(params["drive"] * block)

    def analytic_vjp(self, x: Sequence[float], theta: Sequence[float], v: Sequence[float]) -> ParamVector:
        x = np.asarray(x, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        p = self.physical_params(theta)
        t = np.tanh(p["drive"] * x)
        d_drive = p["level"] * (1.0 - t * t) * x
        d_level = t
        by_name = {"drive": d_drive, "level": d_level}
        return np.array([float(np.dot(v, by_name[s.name])) * _width(s) for s in self.param_specs])


class QuadraticProbeFx(BlackboxFx):
    """Ignores its input and emits the constant frame theta**2."""

    effect_id = "quadratic_probe"

    def build_specs(self) -> List[ParamSpec]:
        return [ParamSpec(name="theta", phys_min=0.0, phys_max=1.0)]

    def _reset_state(self) -> None:
        pass

    def _process_block(self, block: AudioFrame, params: Mapping[str, float]) -> AudioFrame:
        return np.full_like(block, params["theta"] ** 2)

    def analytic_vjp(self, x: Sequence[float], theta: Sequence[float], v: Sequence[float]) -> ParamVector:
        spec = self.param_specs.specs[0]
        t = self.physical_params(theta)["theta"]
        return np.array([2.0 * t * float(np.sum(v)) * _width(spec)])


class OnePoleFx(BlackboxFx):
    """y[n] = c * y[n-1] + (1 - c) * x[n] with a trainable coefficient c."""

    effect_id = "one_pole"

    def build_specs(self) -> List[ParamSpec]:
        return [ParamSpec(name="coeff", phys_min=0.0, phys_max=0.99)]

    def _reset_state(self) -> None:
        self._y = 0.0

    def _process_block(self, block: AudioFrame, params: Mapping[str, float]) -> AudioFrame:
        c = params["coeff"]
        out = np.empty_like(block)
        y = self._y
        for i, s in enumerate(block):
            y = c * y + (1.0 - c) * s
            out[i] = y
        self._y = y
        return out

    def analytic_vjp(self, x: Sequence[float], theta: Sequence[float], v: Sequence[float]) -> ParamVector:
        c = self.physical_params(theta)["coeff"]
        y, dy = self._y, 0.0
        total = 0.0
        for s, g in zip(np.asarray(x, dtype=np.float64), np.asarray(v, dtype=np.float64)):
            dy = y + c * dy - s
            y = c * y + (1.0 - c) * s
            total += g * dy
        return np.array([total * _width(self.param_specs.specs[0])])
