"""
Effect registry by string id and the config model that selects an effect.

``create_effect`` is the only constructor the trainer, the data generator
and the CLI use, so every effect they build is visible in ``fx.registry``.
"""
from __future__ import annotations

from typing import Any, Callable, Dict, List, Optional, Type

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..errors import ConfigError
from . import registry
from .base import BlackboxFx, FrameConfig
from .chain import FxChain
from .dynamics import Compressor, Limiter
from .eq import GraphicEq
from .multiband import MASTERING_COMPRESSOR_FIXED, MultibandCompressor, MultibandGate
from .probes import GainFx, IdentityFx, OnePoleFx, QuadraticProbeFx, SoftClipFx

EFFECTS: Dict[str, Type[BlackboxFx]] = {
    cls.effect_id: cls
    for cls in (
        MultibandCompressor,
        MultibandGate,
        GraphicEq,
        Limiter,
        Compressor,
        GainFx,
        IdentityFx,
        SoftClipFx,
        QuadraticProbeFx,
        OnePoleFx,
    )
}
CHAIN_ID = FxChain.effect_id


def available_effects() -> List[str]:
    return sorted([*EFFECTS, CHAIN_ID])


class EffectConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: str = Field(description="registered effect id, or 'chain'")
    fixed: Dict[str, float] = Field(default_factory=dict, description="non-trainable physical values by name")
    overrides: Dict[str, Dict[str, Any]] = Field(
        default_factory=dict, description="per-parameter ParamSpec field replacements"
    )
    children: List["EffectConfig"] = Field(default_factory=list, description="chain members in order")

    @field_validator("id")
    @classmethod
    def _known_id(cls, v: str) -> str:
        if v not in EFFECTS and v != CHAIN_ID:
            raise ValueError(f"unknown effect '{v}'. Available: {', '.join(available_effects())}")
        return v

    @model_validator(mode="after")
    def _chain_shape(self) -> "EffectConfig":
        if self.id == CHAIN_ID:
            if not self.children:
                raise ValueError("a chain needs at least one child effect")
            if self.fixed or self.overrides:
                raise ValueError("set fixed values and overrides on the chain's children")
        elif self.children:
            raise ValueError(f"'{self.id}' does not take children")
        return self


def _build(cfg: EffectConfig, frame: FrameConfig) -> BlackboxFx:
    if cfg.id == CHAIN_ID:
        kids = [_build(c, frame) for c in cfg.children]
        return FxChain(kids, sample_rate=frame.sample_rate, block_size=frame.block_size)
    return EFFECTS[cfg.id](
        sample_rate=frame.sample_rate,
        block_size=frame.block_size,
        fixed=cfg.fixed,
        overrides=cfg.overrides,
    )


def create_effect(cfg: EffectConfig, frame: Optional[FrameConfig] = None, track: bool = True) -> BlackboxFx:
    """Instantiate ``cfg``; tracked instances count towards the live registry."""
    frame = frame or FrameConfig()
    try:
        fx = _build(cfg, frame)
    except ConfigError as exc:
        raise ConfigError(exc.message, field=f"effect.{exc.field or cfg.id}") from exc
    return registry.track(fx) if track else fx


def effect_factory(cfg: EffectConfig, frame: Optional[FrameConfig] = None) -> Callable[[], BlackboxFx]:
    return lambda: create_effect(cfg, frame)


def mastering_chain_config() -> EffectConfig:
    """Multiband compressor (16 trainable), graphic EQ (33) and limiter (1)."""
    return EffectConfig(
        id=CHAIN_ID,
        children=[
            EffectConfig(id="multiband_compressor", fixed=dict(MASTERING_COMPRESSOR_FIXED)),
            EffectConfig(id="graphic_eq"),
            EffectConfig(id="limiter"),
        ],
    )
