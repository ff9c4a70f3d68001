"""fxgrad: train audio-analysis encoders through opaque, stateful audio effects."""

__version__ = "0.1.0"
