"""
Stateful minibatch scheduling.

Every batch slot streams one clip in consecutive, non-overlapping N-sample
frames and owns the replica set that processes them. When a clip runs out the
slot draws a new one uniformly at random (with replacement) and resets its
replicas before the first frame of the new clip.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from ..errors import ConfigError
from ..fx.base import BlackboxFx
from ..fx.replicas import ReplicaSet

logger = logging.getLogger(__name__)

_SWAP_STREAM = 0x5A


@dataclass
class ClipPair:
    clip_id: str
    input: np.ndarray
    target: np.ndarray

    def __len__(self) -> int:
        return int(self.input.shape[0])


@dataclass
class SlotBatch:
    slot: int
    clip_id: str
    offset: int
    context: np.ndarray
    x: np.ndarray
    y: np.ndarray
    swapped: bool


class BatchSlot:
    def __init__(self, index: int, replicas: ReplicaSet, seed: int):
        self.index = index
        self.replicas = replicas
        self.rng = np.random.default_rng([int(seed), int(index), _SWAP_STREAM])
        self.clip: Optional[ClipPair] = None
        self.offset = 0
        self.swaps = 0

    def swap(self, clips: Sequence[ClipPair]) -> None:
        self.clip = clips[int(self.rng.integers(len(clips)))]
        self.offset = 0
        self.swaps += 1
        self.replicas.reset()


def context_window(signal: np.ndarray, offset: int, frame_size: int, context_size: int) -> np.ndarray:
    """The C samples centered on the frame at ``offset``; zeros outside the clip."""
    start = offset + frame_size // 2 - context_size // 2
    out = np.zeros(context_size)
    lo, hi = max(start, 0), min(start + context_size, signal.shape[0])
    if hi > lo:
        out[lo - start:hi - start] = signal[lo:hi]
    return out


def frame_contexts(signal: np.ndarray, frame_size: int, context_size: int) -> np.ndarray:
    n_frames = signal.shape[0] // frame_size
    return np.stack([context_window(signal, i * frame_size, frame_size, context_size) for i in range(n_frames)])


def usable_clips(clips: Sequence[ClipPair], frame_size: int) -> List[ClipPair]:
    keep = []
    for clip in clips:
        if len(clip) < frame_size:
            logger.warning("Skipping clip %s: %d samples is shorter than one frame (%d)", clip.clip_id, len(clip), frame_size)
            continue
        keep.append(clip)
    if not keep:
        raise ConfigError("no clip holds a full frame", field="data")
    return keep


def build_slots(
    n_slots: int,
    factory: Callable[[], BlackboxFx],
    n_pairs: int,
    seed: int,
) -> List[BatchSlot]:
    return [BatchSlot(i, ReplicaSet(factory, n_pairs=n_pairs), seed) for i in range(n_slots)]


def schedule_step(
    slots: Sequence[BatchSlot],
    clips: Sequence[ClipPair],
    frame_size: int,
    context_size: int,
) -> List[SlotBatch]:
    """Next frame for every slot; exhausted or unassigned slots swap first."""
    if not clips:
        raise ConfigError("dataset is empty", field="data")
    out: List[SlotBatch] = []
    for slot in slots:
        swapped = False
        if slot.clip is None or slot.offset + frame_size > len(slot.clip):
            slot.swap(clips)
            swapped = True
        clip, off = slot.clip, slot.offset
        out.append(
            SlotBatch(
                slot=slot.index,
                clip_id=clip.clip_id,
                offset=off,
                context=context_window(clip.input, off, frame_size, context_size),
                x=clip.input[off:off + frame_size],
                y=clip.target[off:off + frame_size],
                swapped=swapped,
            )
        )
        slot.offset += frame_size
    return out
