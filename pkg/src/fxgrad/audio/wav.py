"""
RIFF/WAVE reading and writing for PCM16 and IEEE float32.

Reading averages stereo (or any multichannel) data to mono and returns
float64 samples; writing emits mono files.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Tuple

import numpy as np

from ..errors import ContractError, WavParseError

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE

Codec = Literal["float32", "pcm16"]


@dataclass
class AudioClip:
    samples: np.ndarray
    sample_rate: int
    source_id: str = ""

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ContractError(f"clips are mono, got shape {self.samples.shape}")
        if not np.all(np.isfinite(self.samples)):
            raise ContractError(f"clip {self.source_id!r} contains non-finite samples")

    def __len__(self) -> int:
        return int(self.samples.shape[0])

    @property
    def duration(self) -> float:
        return len(self) / float(self.sample_rate)


def _chunks(data: bytes):
    """Yield (chunk_id, payload_offset, size) after the RIFF header."""
    pos = 12
    while pos + 8 <= len(data):
        cid, size = struct.unpack_from("<4sI", data, pos)
        yield cid.decode("latin-1"), pos + 8, size
        pos += 8 + size + (size & 1)


def _parse_fmt(data: bytes, off: int, size: int) -> Tuple[int, int, int, int]:
    if size < 16:
        raise WavParseError("fmt chunk too short", off, "fmt ")
    fmt_tag, channels, rate, _, _, bits = struct.unpack_from("<HHIIHH", data, off)
    if fmt_tag == WAVE_FORMAT_EXTENSIBLE:
        if size < 40:
            raise WavParseError("extensible fmt chunk too short", off, "fmt ")
        fmt_tag = struct.unpack_from("<H", data, off + 24)[0]
    return fmt_tag, channels, rate, bits


def decode_wav(data: bytes) -> Tuple[np.ndarray, int]:
    if len(data) < 12:
        raise WavParseError("file shorter than the RIFF header", len(data), "RIFF")
    riff, _, wave = struct.unpack_from("<4sI4s", data, 0)
    if riff != b"RIFF" or wave != b"WAVE":
        raise WavParseError("not a RIFF/WAVE file", 0, "RIFF")
    fmt = None
    for cid, off, size in _chunks(data):
        if cid == "fmt ":
            fmt = _parse_fmt(data, off, size)
        elif cid == "data":
            if fmt is None:
                raise WavParseError("data chunk before fmt chunk", off - 8, "fmt ")
            available = len(data) - off
            if size > available:
                raise WavParseError(f"data chunk declares {size} bytes, {available} present", off - 8, "data")
            return _decode_samples(data[off:off + size], fmt, off), fmt[2]
    if fmt is None:
        raise WavParseError("missing chunk", len(data), "fmt ")
    raise WavParseError("missing chunk", len(data), "data")


def _decode_samples(payload: bytes, fmt: Tuple[int, int, int, int], off: int) -> np.ndarray:
    fmt_tag, channels, _, bits = fmt
    if channels < 1:
        raise WavParseError("zero channels", off, "fmt ")
    if fmt_tag == WAVE_FORMAT_PCM and bits == 16:
        raw = np.frombuffer(payload[: len(payload) - len(payload) % 2], dtype="<i2").astype(np.float64) / 32768.0
    elif fmt_tag == WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        raw = np.frombuffer(payload[: len(payload) - len(payload) % 4], dtype="<f4").astype(np.float64)
    else:
        raise WavParseError(f"unsupported codec (format {fmt_tag:#06x}, {bits} bits)", off, "fmt ")
    frames = raw.shape[0] // channels
    return raw[: frames * channels].reshape(frames, channels).mean(axis=1)


def wav_read(path: str | Path) -> AudioClip:
    path = Path(path)
    samples, rate = decode_wav(path.read_bytes())
    return AudioClip(samples=samples, sample_rate=rate, source_id=path.stem)


def encode_wav(samples: np.ndarray, sample_rate: int, codec: Codec = "float32") -> bytes:
    x = np.asarray(samples, dtype=np.float64)
    if codec == "pcm16":
        payload = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2").tobytes()
        fmt_tag, bits = WAVE_FORMAT_PCM, 16
    elif codec == "float32":
        payload = x.astype("<f4").tobytes()
        fmt_tag, bits = WAVE_FORMAT_IEEE_FLOAT, 32
    else:
        raise ContractError(f"unknown codec {codec!r}")
    block = bits // 8
    fmt = struct.pack("<HHIIHH", fmt_tag, 1, int(sample_rate), int(sample_rate) * block, block, bits)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(payload)) + payload + (b"\x00" if len(payload) & 1 else b"")
    return b"RIFF" + struct.pack("<I", len(body)) + body


def wav_write(path: str | Path, clip: AudioClip, codec: Codec = "float32") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_wav(clip.samples, clip.sample_rate, codec))
    return path
