"""
Paired (input, target) datasets.

Synthetic pairs come from a teacher effect driven by a hidden parameter
trajectory. On disk a dataset is a directory of WAV files plus a tab
separated manifest (``input_path<TAB>target_path<TAB>split``) and a
``hidden_params.json`` sidecar. The sidecar is for diagnostics only; nothing
on the training path reads it.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from ..errors import ConfigError, ContractError
from ..fx.base import FrameConfig, apply_trajectory, normalize
from ..fx.factory import EffectConfig, create_effect
from ..telemetry import trace
from ..train.schedule import ClipPair
from .loudness import align_pair, loudness_normalize, rms_dbfs
from .wav import AudioClip, Codec, wav_read, wav_write

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.tsv"
HIDDEN_PARAMS_NAME = "hidden_params.json"
SPLITS = ("train", "val", "test")
Split = Literal["train", "val", "test"]

_TEACHER_STREAM = 0x7E
_SPLIT_STREAM = 0x5B


class TeacherSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    effect: EffectConfig = Field(description="effect that renders the targets")
    trajectory: Literal["constant", "piecewise"] = Field(
        default="constant", description="one hidden vector for every clip, or piecewise-linear per clip"
    )
    hidden: Optional[List[float]] = Field(
        default=None, description="normalized hidden vector for constant trajectories; drawn from the seed when unset"
    )
    physical: Dict[str, float] = Field(
        default_factory=dict, description="hidden values in physical units, overriding entries of `hidden`"
    )
    segment_s: float = Field(default=1.0, gt=0.0, description="knot spacing of piecewise trajectories")
    low: float = Field(default=0.2, ge=0.0, le=1.0)
    high: float = Field(default=0.8, ge=0.0, le=1.0)

    @field_validator("hidden")
    @classmethod
    def _unit_range(cls, v: Optional[List[float]]) -> Optional[List[float]]:
        if v is not None and any(not (0.0 <= t <= 1.0) for t in v):
            raise ValueError("hidden values must lie in [0, 1]")
        return v


@dataclass
class GeneratedPair:
    pair_id: str
    input: AudioClip
    target: AudioClip
    thetas: np.ndarray


@dataclass
class ManifestRow:
    input_path: Path
    target_path: Path
    split: str


# ---- teacher generation -------------------------------------------------------
def _constant_hidden(teacher: TeacherSpec, specs, seed: int) -> np.ndarray:
    rng = np.random.default_rng([int(seed), _TEACHER_STREAM])
    P = len(specs)
    if teacher.hidden is not None:
        if len(teacher.hidden) != P:
            raise ConfigError(f"expected {P} hidden values, got {len(teacher.hidden)}", field="data.teacher.hidden")
        theta = np.asarray(teacher.hidden, dtype=np.float64)
    else:
        theta = rng.uniform(teacher.low, teacher.high, size=P)
    for name, value in teacher.physical.items():
        if name not in specs.names:
            raise ConfigError(f"unknown parameter {name!r}", field="data.teacher.physical")
        spec = next(s for s in specs if s.name == name)
        theta[specs.names.index(name)] = normalize(spec, value)
    return theta


def _piecewise(teacher: TeacherSpec, n_frames: int, P: int, frame: FrameConfig, rng) -> np.ndarray:
    hop_s = frame.frame_size / frame.sample_rate
    n_knots = int(math.ceil(n_frames * hop_s / teacher.segment_s)) + 1
    knots = rng.uniform(teacher.low, teacher.high, size=(n_knots, P))
    knot_t = np.arange(n_knots) * teacher.segment_s
    centers = (np.arange(n_frames) + 0.5) * hop_s
    return np.stack([np.interp(centers, knot_t, knots[:, p]) for p in range(P)], axis=1)


def pad_to_frames(samples: np.ndarray, frame_size: int) -> np.ndarray:
    n = int(math.ceil(len(samples) / frame_size)) * frame_size
    return np.pad(np.asarray(samples, dtype=np.float64), (0, n - len(samples)))


def teacher_trajectories(
    teacher: TeacherSpec, n_frames: Sequence[int], seed: int, frame: Optional[FrameConfig] = None
) -> List[np.ndarray]:
    """Per-clip (n_frames, P) hidden trajectories in [0, 1]."""
    frame = frame or FrameConfig()
    specs = create_effect(teacher.effect, frame, track=False).param_specs
    if teacher.trajectory == "constant":
        theta = _constant_hidden(teacher, specs, seed)
        return [np.tile(theta, (n, 1)) for n in n_frames]
    return [
        _piecewise(teacher, n, len(specs), frame, np.random.default_rng([int(seed), i, _TEACHER_STREAM]))
        for i, n in enumerate(n_frames)
    ]


@trace("datagen")
def generate_teacher_pairs(
    sources: Sequence[AudioClip], teacher: TeacherSpec, seed: int, frame: Optional[FrameConfig] = None
) -> List[GeneratedPair]:
    """Render every source through a fresh teacher instance.

    Sources are zero-padded to whole frames; the target is the teacher's
    output for the hidden trajectory, so feeding the stored trajectory
    through a fresh instance reproduces it exactly.
    """
    if not sources:
        raise ContractError("generate_teacher_pairs needs at least one source clip")
    frame = frame or FrameConfig()
    for clip in sources:
        if clip.sample_rate != frame.sample_rate:
            raise ContractError(
                f"source {clip.source_id!r} is {clip.sample_rate} Hz, configured rate is {frame.sample_rate} Hz"
            )
    padded = [pad_to_frames(c.samples, frame.frame_size) for c in sources]
    trajectories = teacher_trajectories(teacher, [len(p) // frame.frame_size for p in padded], seed, frame)
    pairs: List[GeneratedPair] = []
    for i, (clip, x, thetas) in enumerate(zip(sources, padded, trajectories)):
        fx = create_effect(teacher.effect, frame, track=False)
        y = apply_trajectory(fx, x, thetas, frame.frame_size)
        pid = f"{i:05d}_{clip.source_id}" if clip.source_id else f"{i:05d}"
        pairs.append(
            GeneratedPair(
                pair_id=pid,
                input=AudioClip(samples=x, sample_rate=frame.sample_rate, source_id=pid),
                target=AudioClip(samples=y, sample_rate=frame.sample_rate, source_id=pid),
                thetas=thetas,
            )
        )
    logger.info("rendered %d pairs through teacher %r (%s)", len(pairs), teacher.effect.id, teacher.trajectory)
    return pairs


# ---- splits & manifests ------------------------------------------------------
def assign_splits(n: int, ratios: Tuple[float, float, float] = (0.8, 0.1, 0.1), seed: int = 0) -> List[str]:
    """Shuffle clip indices and cut them train/val/test by ``ratios``.

    With three or more clips, val and test get at least one clip each.
    """
    total = float(sum(ratios))
    if total <= 0.0 or any(r < 0.0 for r in ratios):
        raise ConfigError("split ratios must be non-negative with a positive sum", field="data.splits")
    n_val = int(round(n * ratios[1] / total))
    n_test = int(round(n * ratios[2] / total))
    if n >= 3:
        n_val = max(n_val, 1 if ratios[1] > 0 else 0)
        n_test = max(n_test, 1 if ratios[2] > 0 else 0)
    n_train = max(n - n_val - n_test, 0)
    order = np.random.default_rng([int(seed), _SPLIT_STREAM]).permutation(n)
    out = [""] * n
    for rank, idx in enumerate(order):
        out[int(idx)] = "train" if rank < n_train else ("val" if rank < n_train + n_val else "test")
    return out


def write_manifest(path: str | Path, rows: Sequence[ManifestRow]) -> Path:
    path = Path(path)
    base = path.parent
    lines = []
    for r in rows:
        inp = Path(r.input_path)
        tgt = Path(r.target_path)
        inp = inp.relative_to(base) if inp.is_absolute() and base in inp.parents else inp
        tgt = tgt.relative_to(base) if tgt.is_absolute() and base in tgt.parents else tgt
        lines.append(f"{inp.as_posix()}\t{tgt.as_posix()}\t{r.split}\n")
    path.write_text("".join(lines), encoding="utf-8")
    return path


def read_manifest(path: str | Path) -> List[ManifestRow]:
    """Parse a manifest; relative paths resolve against its directory."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"manifest not found: {path}", field="data.manifest")
    rows: List[ManifestRow] = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ConfigError(f"expected 3 tab-separated fields, got {len(parts)}", field=f"{path.name}:{lineno}")
        inp, tgt, split = (p.strip() for p in parts)
        if split not in SPLITS:
            raise ConfigError(f"unknown split {split!r}", field=f"{path.name}:{lineno}")
        rows.append(ManifestRow(input_path=path.parent / inp, target_path=path.parent / tgt, split=split))
    return rows


def write_dataset(
    pairs: Sequence[GeneratedPair],
    out_dir: str | Path,
    teacher: TeacherSpec,
    splits: Sequence[str],
    frame: Optional[FrameConfig] = None,
    codec: Codec = "float32",
) -> Path:
    """Write WAV pairs, the manifest and the hidden-parameter sidecar; returns the manifest path."""
    if len(splits) != len(pairs):
        raise ContractError(f"{len(pairs)} pairs but {len(splits)} split labels")
    frame = frame or FrameConfig()
    out = Path(out_dir)
    (out / "inputs").mkdir(parents=True, exist_ok=True)
    (out / "targets").mkdir(parents=True, exist_ok=True)
    specs = create_effect(teacher.effect, frame, track=False).param_specs
    rows: List[ManifestRow] = []
    hidden: Dict[str, Dict] = {}
    for pair, split in zip(pairs, splits):
        inp = wav_write(out / "inputs" / f"{pair.pair_id}.wav", pair.input, codec)
        tgt = wav_write(out / "targets" / f"{pair.pair_id}.wav", pair.target, codec)
        rows.append(ManifestRow(input_path=inp.relative_to(out), target_path=tgt.relative_to(out), split=split))
        entry: Dict = {"split": split, "n_frames": int(pair.thetas.shape[0])}
        if teacher.trajectory == "constant":
            entry["theta"] = [float(t) for t in pair.thetas[0]]
            entry["physical"] = specs.denormalize(pair.thetas[0])
        else:
            entry["thetas"] = [[float(t) for t in row] for row in pair.thetas]
        hidden[pair.pair_id] = entry
    doc = {
        "effect": teacher.effect.model_dump(),
        "trajectory": teacher.trajectory,
        "params": specs.names,
        "frame_size": frame.frame_size,
        "sample_rate": frame.sample_rate,
        "pairs": hidden,
    }
    (out / HIDDEN_PARAMS_NAME).write_text(json.dumps(doc, indent=2, sort_keys=True), encoding="utf-8")
    manifest = write_manifest(out / MANIFEST_NAME, rows)
    logger.info("wrote %d pairs to %s", len(rows), out)
    return manifest


# ---- sources & loading -------------------------------------------------------
def load_source_dir(
    directory: str | Path, sample_rate: int, normalize_dbfs: Optional[float] = None
) -> List[AudioClip]:
    """Read every ``*.wav`` under ``directory`` in name order."""
    directory = Path(directory)
    if not directory.is_dir():
        raise ConfigError(f"not a directory: {directory}", field="data.source_dir")
    clips: List[AudioClip] = []
    for path in sorted(directory.glob("*.wav")):
        clip = wav_read(path)
        if clip.sample_rate != sample_rate:
            raise ContractError(f"{path.name} is {clip.sample_rate} Hz, configured rate is {sample_rate} Hz")
        if normalize_dbfs is not None:
            if not np.isfinite(rms_dbfs(clip.samples)):
                logger.warning("skipping silent source %s", path.name)
                continue
            clip = loudness_normalize(clip, normalize_dbfs)
        clips.append(clip)
    if not clips:
        raise ConfigError(f"no usable .wav files in {directory}", field="data.source_dir")
    return clips


class PairedDataset:
    """Clip pairs loaded from a manifest, optionally restricted to one split."""

    def __init__(self, pairs: List[ClipPair], splits: List[str], sample_rate: int):
        self.pairs = pairs
        self.splits = splits
        self.sample_rate = sample_rate

    def __len__(self) -> int:
        return len(self.pairs)

    def split(self, name: str) -> List[ClipPair]:
        return [p for p, s in zip(self.pairs, self.splits) if s == name]

    @classmethod
    def from_manifest(
        cls,
        path: str | Path,
        split: Optional[str] = None,
        sample_rate: Optional[int] = None,
        align_maxlag: Optional[int] = None,
    ) -> "PairedDataset":
        rows = [r for r in read_manifest(path) if split is None or r.split == split]
        pairs: List[ClipPair] = []
        labels: List[str] = []
        rate = sample_rate
        for r in rows:
            inp, tgt = wav_read(r.input_path), wav_read(r.target_path)
            rate = rate or inp.sample_rate
            for clip, p in ((inp, r.input_path), (tgt, r.target_path)):
                if clip.sample_rate != rate:
                    raise ContractError(f"{p} is {clip.sample_rate} Hz, expected {rate} Hz")
            if align_maxlag:
                inp, tgt = align_pair(inp, tgt, align_maxlag)
            n = min(len(inp), len(tgt))
            if len(inp) != len(tgt):
                logger.warning("%s: input/target lengths differ (%d vs %d), truncating", r.input_path.name, len(inp), len(tgt))
            pairs.append(ClipPair(clip_id=r.input_path.stem, input=inp.samples[:n], target=tgt.samples[:n]))
            labels.append(r.split)
        logger.info("loaded %d pairs from %s%s", len(pairs), path, f" ({split})" if split else "")
        return cls(pairs, labels, int(rate or FrameConfig().sample_rate))
