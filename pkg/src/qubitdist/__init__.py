"""Fock-state simulation of single-photon qubit distribution over collective-noise channels.

A reference photon in ``|D>`` travels one time bin ahead of the signal
photon; after two polarization-carrying channels and a parity-check decoder
the signal polarization is recovered on post-selection, whatever the
collective noise did.
"""
from importlib.metadata import PackageNotFoundError, version as _version

try:
    __version__ = _version("qubitdist")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"

from .errors import ConfigurationError, ValidationError
from .fock import FockState, ModeLabel, ModeRegistry, ModeTransform, apply_transform, inner_product, project
from .optics import ElementSpec, build_element
from .noise import DephasingParams, NoiseSampler, RotationParams, apply_dephasing, apply_rotation, sample_noise
from .sources import SignalState, SourceSpec, encoder_state, source_state
from .detection import DetectorModel, click_probability, measure_analyzer_X, postselect_coincidence, correct_phase
from .protocol import ProtocolConfig, RunReport, run_distribution, run_monte_carlo, run_multiphoton_error

__all__ = [
    "ConfigurationError", "ValidationError",
    "FockState", "ModeLabel", "ModeRegistry", "ModeTransform", "apply_transform", "inner_product", "project",
    "ElementSpec", "build_element",
    "DephasingParams", "RotationParams", "NoiseSampler", "apply_dephasing", "apply_rotation", "sample_noise",
    "SignalState", "SourceSpec", "encoder_state", "source_state",
    "DetectorModel", "click_probability", "measure_analyzer_X", "postselect_coincidence", "correct_phase",
    "ProtocolConfig", "RunReport", "run_distribution", "run_monte_carlo", "run_multiphoton_error",
]
