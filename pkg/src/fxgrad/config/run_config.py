"""
Run configuration: one pydantic model per concern, aggregated by ``RunConfig``.

Sources, lowest precedence first: a named preset, a config file, the
environment (``FXGRAD_SEED``, ``FXGRAD_WORKERS``, ``FXGRAD_OUT_DIR``) and
command-line overrides. Config files are either YAML documents or flat
``section.key = value`` text; values of flat files are parsed as YAML
scalars or flow collections, so ``channels = [8, 16]`` works.
"""
from __future__ import annotations

import glob
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..audio.dataset import MANIFEST_NAME, TeacherSpec
from ..audio.mfcc import MfccConfig
from ..audio.synth import SourceSpec
from ..audio.wav import Codec
from ..encoder.melspec import MelFrontendConfig
from ..encoder.network import EncoderConfig
from ..errors import ConfigError
from ..fx.base import FrameConfig
from ..fx.factory import EffectConfig, create_effect
from ..grad.perturbation import PerturbationConfig
from ..loss.delay_invariant import LossConfig
from ..train.render import SmootherConfig
from ..train.trainer import TrainerConfig
from .settings import get_int_setting, get_setting

logger = logging.getLogger(__name__)

PRESET_DIR = os.path.join(os.path.dirname(__file__), "presets")


class DataConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dir: str = Field(default="data", description="dataset directory written by datagen")
    manifest: Optional[str] = Field(default=None, description="manifest read by train/eval; defaults to <dir>/manifest.tsv")
    sources: Optional[SourceSpec] = Field(default=None, description="synthetic source material")
    source_dir: Optional[str] = Field(default=None, description="directory of WAV sources, used instead of `sources`")
    normalize_dbfs: Optional[float] = Field(default=-25.0, le=0.0, description="RMS level for source_dir clips")
    teacher: Optional[TeacherSpec] = None
    pairs: Optional[int] = Field(default=None, ge=1, description="pair count; overrides sources.count")
    splits: Tuple[float, float, float] = (0.8, 0.1, 0.1)
    align_maxlag: Optional[int] = Field(default=None, ge=1, description="cross-correlation alignment of external pairs")
    codec: Codec = "float32"

    @model_validator(mode="after")
    def _pair_count(self) -> "DataConfig":
        if self.pairs is not None and self.sources is not None and self.sources.count != self.pairs:
            self.sources = self.sources.model_copy(update={"count": self.pairs})
        return self

    def manifest_path(self) -> Path:
        return Path(self.manifest) if self.manifest else Path(self.dir) / MANIFEST_NAME


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    task: str = "custom"
    seed: int = Field(default=0, ge=0)
    workers: int = Field(default=1, ge=1)
    out_dir: str = "runs/default"
    n_params: Optional[int] = Field(default=None, ge=1, description="encoder head size; must match the effect")
    frame: FrameConfig = Field(default_factory=FrameConfig)
    effect: EffectConfig = Field(default_factory=lambda: EffectConfig(id="multiband_compressor"))
    perturbation: PerturbationConfig = Field(default_factory=PerturbationConfig)
    loss: LossConfig = Field(default_factory=LossConfig)
    mel: MelFrontendConfig = Field(default_factory=MelFrontendConfig)
    encoder: EncoderConfig = Field(default_factory=EncoderConfig)
    trainer: TrainerConfig = Field(default_factory=TrainerConfig)
    smoother: SmootherConfig = Field(default_factory=SmootherConfig)
    mfcc: MfccConfig = Field(default_factory=MfccConfig)
    data: DataConfig = Field(default_factory=DataConfig)

    @model_validator(mode="after")
    def _consistency(self) -> "RunConfig":
        if "rng_seed" not in self.perturbation.model_fields_set:
            self.perturbation = self.perturbation.model_copy(update={"rng_seed": self.seed})
        if self.mel.window > self.frame.context_size:
            raise ValueError("mel.window exceeds frame.context_size")
        if self.data.source_dir and not os.path.isdir(self.data.source_dir):
            raise ValueError(f"data.source_dir does not exist: {self.data.source_dir}")
        return self

    def effect_params(self) -> int:
        return create_effect(self.effect, self.frame, track=False).n_params

    def check_param_count(self) -> int:
        """Build the effect once and compare its P with ``n_params``."""
        P = self.effect_params()
        if self.n_params is not None and self.n_params != P:
            raise ConfigError(
                f"encoder head declares {self.n_params} outputs but effect '{self.effect.id}' has {P} parameters",
                field="n_params",
            )
        return P


# ---- file formats --------------------------------------------------------------
def _set_dotted(target: Dict[str, Any], dotted: str, value: Any) -> None:
    keys = dotted.split(".")
    node = target
    for k in keys[:-1]:
        nxt = node.get(k)
        if not isinstance(nxt, dict):
            nxt = node[k] = {}
        node = nxt
    node[keys[-1]] = value


def parse_flat(text: str, source: str = "<config>") -> Dict[str, Any]:
    out: Dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError("expected 'section.key = value'", field=f"{source}:{lineno}")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key or any(not part for part in key.split(".")):
            raise ConfigError(f"malformed key {key!r}", field=f"{source}:{lineno}")
        try:
            parsed = yaml.safe_load(value.strip()) if value.strip() else None
        except yaml.YAMLError as exc:
            raise ConfigError(f"unparseable value {value.strip()!r}: {exc}", field=key) from exc
        _set_dotted(out, key, parsed)
    return out


def read_config_file(path: str | Path) -> Dict[str, Any]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}", field="config")
    text = path.read_text(encoding="utf-8")
    if path.suffix in (".yml", ".yaml"):
        try:
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML: {exc}", field=str(path)) from exc
        if not isinstance(data, dict):
            raise ConfigError("top level must be a mapping", field=str(path))
        return data
    return parse_flat(text, path.name)


def deep_merge(base: Dict[str, Any], update: Mapping[str, Any]) -> Dict[str, Any]:
    for k, v in update.items():
        if isinstance(v, Mapping) and isinstance(base.get(k), dict):
            deep_merge(base[k], v)
        else:
            base[k] = dict(v) if isinstance(v, Mapping) else v
    return base


# ---- presets -------------------------------------------------------------------
def available_presets() -> List[str]:
    return sorted(Path(p).stem for p in glob.glob(os.path.join(PRESET_DIR, "*.yml")))


def get_preset(preset_name: str) -> Dict[str, Any]:
    """Raw mapping of a shipped preset."""
    path = os.path.join(PRESET_DIR, f"{preset_name}.yml")
    if not os.path.isfile(path):
        raise ValueError(f"Unknown preset: {preset_name}. Available: {available_presets()}")
    with open(path, "r", encoding="utf-8") as f:
        return yaml.safe_load(f) or {}


# ---- loading -------------------------------------------------------------------
def _env_overrides() -> Dict[str, Any]:
    out: Dict[str, Any] = {}
    seed = get_int_setting("SEED")
    if seed is not None:
        out["seed"] = seed
    workers = get_int_setting("WORKERS")
    if workers is not None:
        out["workers"] = workers
    out_dir = get_setting("OUT_DIR")
    if out_dir:
        out["out_dir"] = out_dir
    return out


def validate_run_config(data: Mapping[str, Any]) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        field = ".".join(str(p) for p in err["loc"]) or "config"
        raise ConfigError(err["msg"], field=field) from exc


def load_run_config(
    path: Optional[str | Path] = None,
    preset: Optional[str] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    use_env: bool = True,
) -> RunConfig:
    """Merge preset, file, environment and dotted ``overrides``, then validate."""
    merged: Dict[str, Any] = {}
    if preset:
        try:
            deep_merge(merged, get_preset(preset))
        except ValueError as exc:
            raise ConfigError(str(exc), field="preset") from exc
    if path:
        deep_merge(merged, read_config_file(path))
    if use_env:
        deep_merge(merged, _env_overrides())
    for key, value in (overrides or {}).items():
        if value is not None:
            nested: Dict[str, Any] = {}
            _set_dotted(nested, key, value)
            deep_merge(merged, nested)
    run = validate_run_config(merged)
    run.check_param_count()
    logger.debug("run config %s: effect=%s seed=%d workers=%d", run.task, run.effect.id, run.seed, run.workers)
    return run


def dump_run_config(run: RunConfig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(yaml.safe_dump(run.model_dump(mode="json"), sort_keys=True), encoding="utf-8")
    return path
