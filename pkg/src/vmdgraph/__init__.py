"""Variational mode decomposition features for graph-based traffic forecasting."""
from .graph import RoadGraph, SpectralOps
from .model import ModelConfig, StModel
from .modeselect import ModeSelectConfig, ModeSelection, select_num_modes
from .spectral import InvalidInputError, Spectrum, TimeSeries
from .vmd import InvalidConfigError, ModeSet, VmdConfig, decompose

__version__ = "0.1.0"

__all__ = [
    "InvalidConfigError", "InvalidInputError", "ModeSelectConfig", "ModeSelection", "ModeSet",
    "ModelConfig", "RoadGraph", "SpectralOps", "Spectrum", "StModel", "TimeSeries", "VmdConfig",
    "decompose", "select_num_modes",
]
