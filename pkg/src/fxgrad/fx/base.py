"""
Opaque stateful effect interface and parameter specifications.

Every effect is driven through ``BlackboxFx.process(x, theta)`` with a
normalized parameter vector in [0, 1]^P. Only the effect itself turns that
vector into physical values; gradient and training code never look inside.
"""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from typing import ClassVar, Dict, Iterable, List, Literal, Mapping, Optional, Sequence

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..errors import ConfigError, ContractError, DomainError
from . import registry

AudioFrame = NDArray[np.float64]
ParamVector = NDArray[np.float64]

Mapping_ = Literal["linear", "logarithmic"]


class FrameConfig(BaseModel):
    """Frame geometry shared by the effects, the encoder front-end and the trainer."""

    model_config = ConfigDict(extra="forbid")

    frame_size: int = Field(default=1024, ge=1, description="N, samples per training frame")
    context_size: int = Field(default=40960, ge=1, description="C, encoder context samples")
    sample_rate: int = Field(default=22050, gt=0)
    block_size: int = Field(default=256, ge=1, description="internal effect block size, divides N")

    @model_validator(mode="after")
    def _check_geometry(self) -> "FrameConfig":
        if self.context_size % self.frame_size != 0:
            raise ValueError("context_size must be a multiple of frame_size")
        if self.frame_size % self.block_size != 0:
            raise ValueError("block_size must divide frame_size")
        if (self.context_size - self.frame_size) % 2 != 0:
            raise ValueError("context_size - frame_size must be even to center the frame")
        return self


class ParamSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    name: str
    unit: str = ""
    phys_min: float
    phys_max: float
    mapping: Mapping_ = "linear"

    @model_validator(mode="after")
    def _check_bounds(self) -> "ParamSpec":
        if not self.phys_min < self.phys_max:
            raise ValueError(f"{self.name}: phys_min must be < phys_max")
        if self.mapping == "logarithmic" and self.phys_min <= 0:
            raise ValueError(f"{self.name}: logarithmic mapping needs phys_min > 0")
        return self


class ParamSpecSet(BaseModel):
    """Ordered parameter list; the order is the canonical gradient index."""

    model_config = ConfigDict(frozen=True)

    specs: List[ParamSpec] = Field(default_factory=list)

    @model_validator(mode="after")
    def _unique(self) -> "ParamSpecSet":
        names = [s.name for s in self.specs]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise ValueError(f"duplicate parameter names: {dup}")
        return self

    def __len__(self) -> int:
        return len(self.specs)

    def __iter__(self):  # type: ignore[override]
        return iter(self.specs)

    @property
    def names(self) -> List[str]:
        return [s.name for s in self.specs]

    def denormalize(self, values: Sequence[float]) -> Dict[str, float]:
        if len(values) != len(self.specs):
            raise ContractError(f"expected {len(self.specs)} parameters, got {len(values)}")
        return {s.name: denormalize(s, float(v)) for s, v in zip(self.specs, values)}

    def normalize(self, physical: Mapping[str, float]) -> ParamVector:
        return np.array([normalize(s, float(physical[s.name])) for s in self.specs], dtype=np.float64)


def denormalize(spec: ParamSpec, v: float) -> float:
    if not (0.0 <= v <= 1.0) or math.isnan(v):
        raise DomainError(f"{spec.name}: normalized value {v!r} outside [0, 1]")
    if spec.mapping == "logarithmic":
        return spec.phys_min * (spec.phys_max / spec.phys_min) ** v
    return spec.phys_min + v * (spec.phys_max - spec.phys_min)


def normalize(spec: ParamSpec, value: float) -> float:
    """Inverse of ``denormalize``; values outside the physical range are clamped."""
    value = min(max(value, spec.phys_min), spec.phys_max)
    if spec.mapping == "logarithmic":
        return math.log(value / spec.phys_min) / math.log(spec.phys_max / spec.phys_min)
    return (value - spec.phys_min) / (spec.phys_max - spec.phys_min)


def clip_params(theta: Sequence[float]) -> ParamVector:
    return np.clip(np.asarray(theta, dtype=np.float64), 0.0, 1.0)


def as_param_vector(theta: Sequence[float], n_params: int) -> ParamVector:
    vec = np.asarray(theta, dtype=np.float64).reshape(-1)
    if vec.shape[0] != n_params:
        raise ContractError(f"parameter vector has length {vec.shape[0]}, expected {n_params}")
    return vec


def _as_frame(x: Sequence[float], block_size: int) -> AudioFrame:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] == 0:
        raise ContractError(f"audio must be a non-empty 1-D array, got shape {arr.shape}")
    if arr.shape[0] % block_size != 0:
        raise ContractError(f"audio length {arr.shape[0]} is not a multiple of block size {block_size}")
    if not np.all(np.isfinite(arr)):
        raise ContractError("audio contains non-finite samples")
    return arr


class BlackboxFx(ABC):
    """Stateful effect reachable only through ``process`` and ``reset``.

    Subclasses declare their full parameter list in ``build_specs``. Names in
    ``fixed`` are held at the given physical value and drop out of the
    trainable ``param_specs``; ``overrides`` replace bounds or mapping of a
    named parameter.
    """

    effect_id: ClassVar[str] = "abstract"

    def __init__(
        self,
        sample_rate: int = 22050,
        block_size: int = 256,
        fixed: Optional[Mapping[str, float]] = None,
        overrides: Optional[Mapping[str, Mapping[str, object]]] = None,
    ):
        self.sample_rate = int(sample_rate)
        self.block_size = int(block_size)
        self.latency = 0
        specs = self.build_specs()
        by_name = {s.name: s for s in specs}
        for name, fields in (overrides or {}).items():
            if name not in by_name:
                raise ConfigError(f"unknown parameter '{name}' for {self.effect_id}", field="overrides")
            try:
                by_name[name] = ParamSpec.model_validate({**by_name[name].model_dump(), **dict(fields)})
            except ValidationError as exc:
                raise ConfigError(str(exc.errors()[0]["msg"]), field=f"overrides.{name}") from exc
        self._fixed: Dict[str, float] = {}
        for name, value in (fixed or {}).items():
            if name not in by_name:
                raise ConfigError(f"unknown parameter '{name}' for {self.effect_id}", field="fixed")
            self._fixed[name] = float(value)
        self._all_specs = [by_name[s.name] for s in specs]
        self.param_specs = ParamSpecSet(specs=[s for s in self._all_specs if s.name not in self._fixed])
        self._reset_state()

    @property
    def n_params(self) -> int:
        return len(self.param_specs)

    @property
    def all_specs(self) -> List[ParamSpec]:
        return list(self._all_specs)

    @abstractmethod
    def build_specs(self) -> List[ParamSpec]:
        """Full parameter list in canonical order."""

    @abstractmethod
    def _reset_state(self) -> None:
        """Restore the freshly constructed internal state."""

    @abstractmethod
    def _process_block(self, block: AudioFrame, params: Mapping[str, float]) -> AudioFrame:
        """Process one block of ``block_size`` samples."""

    def _configure(self, params: Mapping[str, float]) -> None:
        """Hook run once per ``process`` call before the blocks (coefficient design)."""

    def physical_params(self, theta: Sequence[float]) -> Dict[str, float]:
        vec = as_param_vector(theta, self.n_params)
        params = dict(self._fixed)
        params.update(self.param_specs.denormalize(vec))
        return params

    def process(self, x: Sequence[float], theta: Sequence[float]) -> AudioFrame:
        frame = _as_frame(x, self.block_size)
        params = self.physical_params(theta)
        self._configure(params)
        out = np.empty_like(frame)
        b = self.block_size
        for start in range(0, frame.shape[0], b):
            out[start:start + b] = self._process_block(frame[start:start + b], params)
        registry.record_process(self, frame.shape[0])
        return out

    def reset(self) -> None:
        self._reset_state()

    def __repr__(self) -> str:
        return f"{type(self).__name__}(P={self.n_params}, fs={self.sample_rate}, block={self.block_size})"


def process(fx: BlackboxFx, x: Sequence[float], theta: Sequence[float]) -> AudioFrame:
    return fx.process(x, theta)


def reset(fx: BlackboxFx) -> None:
    fx.reset()


def apply_trajectory(
    fx: BlackboxFx,
    audio: Sequence[float],
    thetas: Iterable[Sequence[float]],
    frame_size: int,
) -> AudioFrame:
    """Stream ``audio`` through ``fx`` one frame per parameter vector.

    ``audio`` must hold exactly ``len(thetas) * frame_size`` samples; the
    instance keeps its state across frames, as during training.
    """
    signal = np.asarray(audio, dtype=np.float64)
    rows = [np.asarray(t, dtype=np.float64) for t in thetas]
    if signal.shape[0] != len(rows) * frame_size:
        raise ContractError(
            f"audio has {signal.shape[0]} samples, expected {len(rows)} frames x {frame_size}"
        )
    out = np.empty_like(signal)
    for i, theta in enumerate(rows):
        sl = slice(i * frame_size, (i + 1) * frame_size)
        out[sl] = fx.process(signal[sl], theta)
    return out
