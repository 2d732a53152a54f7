"""Two coupled dissipative oscillators in the high-temperature Caldeira-Leggett regime."""

from .model import (CouplingParams, ModelParams, OscillatorParams, ReservoirSpec, Topology,
                    ValidatedModel, reduced_masses, validate)
from .propagator import Component, GaussianSuperposition

__version__ = "0.1.0"

__all__ = [
    "Component", "CouplingParams", "GaussianSuperposition", "ModelParams", "OscillatorParams",
    "ReservoirSpec", "Topology", "ValidatedModel", "reduced_masses", "validate",
]
