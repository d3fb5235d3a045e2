"""Minimal tensor/layer machinery with exact backpropagation.

Hot correlation kernels live in a compiled extension with a NumPy fallback;
see :mod:`chanadapt.neural.backend` for the selection rules.
"""

from .backend import BACKEND_NAME, available_backends
from .checkpoint import load_checkpoint, read_meta, save_checkpoint
from .models import (GanPair, PatchDiscriminator, RefinementCnn, UnetGenerator,
                     build_model, crop_plane, pad_plane, padded_gan_shape,
                     parameter_count)
from .optim import Adam
from .training import TrainConfig, refine, refine_plane, train_cnn, train_gan

__all__ = [
    "BACKEND_NAME", "available_backends", "load_checkpoint", "read_meta",
    "save_checkpoint", "GanPair", "PatchDiscriminator", "RefinementCnn",
    "UnetGenerator", "build_model", "crop_plane", "pad_plane",
    "padded_gan_shape", "parameter_count", "Adam", "TrainConfig", "refine",
    "refine_plane", "train_cnn", "train_gan",
]
