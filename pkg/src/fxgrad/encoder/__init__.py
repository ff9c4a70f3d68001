"""Log-mel front-end and the convolutional parameter encoder."""
from .checkpoint import load_checkpoint, save_checkpoint
from .melspec import MelFrontendConfig, mel_centers, mel_filterbank, melspec
from .network import (
    EncoderConfig,
    EncoderWeights,
    ForwardCache,
    count_weights,
    encoder_backward,
    encoder_forward,
    init_weights,
)

__all__ = [
    "EncoderConfig",
    "EncoderWeights",
    "ForwardCache",
    "MelFrontendConfig",
    "count_weights",
    "encoder_backward",
    "encoder_forward",
    "init_weights",
    "load_checkpoint",
    "mel_centers",
    "mel_filterbank",
    "melspec",
    "save_checkpoint",
]
