"""Holographic page-data simulation and autoencoder-based restoration."""

from holorestore.autoencoder import AeParams, TrainConfig, restore, train
from holorestore.optics import (
    ComplexField,
    OpticalConfig,
    propagate,
    random_phase_object,
    reconstruct,
    record_hologram,
)
from holorestore.patterns import PageDataSpec, bit_error_rate, generate_page_data
from holorestore.tiling import tile, untile

__all__ = [
    "AeParams",
    "ComplexField",
    "OpticalConfig",
    "PageDataSpec",
    "TrainConfig",
    "bit_error_rate",
    "generate_page_data",
    "propagate",
    "random_phase_object",
    "reconstruct",
    "record_hologram",
    "restore",
    "tile",
    "train",
    "untile",
]

__version__ = "0.1.0"
