"""Learnable audio frontends (log-mel, LEAF-style, nnAudio-style) for medical sound classification."""

__version__ = "0.1.0"
