"""Black-box effect interface, the effect library and replica bookkeeping."""
from .base import (
    AudioFrame,
    BlackboxFx,
    FrameConfig,
    ParamSpec,
    ParamSpecSet,
    ParamVector,
    apply_trajectory,
    clip_params,
    denormalize,
    normalize,
    process,
    reset,
)
from .factory import EFFECTS, EffectConfig, available_effects, create_effect, effect_factory, mastering_chain_config
from .replicas import ReplicaSet, replica_process

__all__ = [
    "AudioFrame",
    "BlackboxFx",
    "EFFECTS",
    "EffectConfig",
    "FrameConfig",
    "ParamSpec",
    "ParamSpecSet",
    "ParamVector",
    "ReplicaSet",
    "apply_trajectory",
    "available_effects",
    "clip_params",
    "create_effect",
    "denormalize",
    "effect_factory",
    "mastering_chain_config",
    "normalize",
    "process",
    "replica_process",
    "reset",
]
