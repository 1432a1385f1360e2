"""The three frontends: fixed log-mel, LEAF-style and nnAudio-style."""

from .config import FeatureMap, FrontendConfig
from .estimators import FRONTEND_TAGS, FRONTENDS, LeafFrontend, MelFrontend, NnAudioFrontend, make_frontend
from .leaf import LeafParams, gabor_kernel, gabor_kernels, init_leaf, leaf_forward, leaf_frontend, pcen
from .mel import hz_to_mel, mel_filterbank_matrix, mel_frontend, mel_to_hz
from .nnaudio import NnAudioParams, init_nnaudio, nnaudio_forward, nnaudio_frontend

__all__ = [
    "FRONTENDS", "FRONTEND_TAGS", "FeatureMap", "FrontendConfig", "LeafFrontend", "LeafParams",
    "MelFrontend", "NnAudioFrontend", "NnAudioParams", "gabor_kernel", "gabor_kernels",
    "hz_to_mel", "init_leaf", "init_nnaudio", "leaf_forward", "leaf_frontend", "make_frontend",
    "mel_filterbank_matrix", "mel_frontend", "mel_to_hz", "nnaudio_forward", "nnaudio_frontend", "pcen",
]
