"""Audio files, synthetic paired datasets, loudness and the MFCC metric."""
from .dataset import (
    GeneratedPair,
    ManifestRow,
    PairedDataset,
    TeacherSpec,
    assign_splits,
    generate_teacher_pairs,
    load_source_dir,
    read_manifest,
    write_dataset,
    write_manifest,
)
from .loudness import align_pair, loudness_normalize, peak_dbfs, peak_normalize, rms_dbfs
from .mfcc import MfccConfig, mfcc, mfcc_distance
from .synth import SourceSpec, synth_sources
from .wav import AudioClip, decode_wav, encode_wav, wav_read, wav_write

__all__ = [
    "AudioClip",
    "GeneratedPair",
    "ManifestRow",
    "MfccConfig",
    "PairedDataset",
    "SourceSpec",
    "TeacherSpec",
    "align_pair",
    "assign_splits",
    "decode_wav",
    "encode_wav",
    "generate_teacher_pairs",
    "load_source_dir",
    "loudness_normalize",
    "mfcc",
    "mfcc_distance",
    "peak_dbfs",
    "peak_normalize",
    "read_manifest",
    "rms_dbfs",
    "synth_sources",
    "wav_read",
    "wav_write",
    "write_dataset",
    "write_manifest",
]
