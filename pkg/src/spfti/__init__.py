"""Single-pixel Fourier transform interferometry with multilevel sampling.

Matrix-free forward model, sampling-profile design, masks, a primal-dual
l1-analysis solver and a seeded MLS-vs-UDS experiment runner.
"""

from .acquisition import HyperCube, MeasurementSet, add_noise, adjoint, err, forward, mur
from .errors import ConfigError, DimensionError, FormatError, NumericalError, SpftiError
from .phantom import PhantomSpec, generate_phantom
from .sampling import (LevelPartition, Mask, SamplingPattern, SamplingProfile, allocate_samples,
                       multilevel_coherence, sampling_profile, spatial_partition,
                       spectral_partition)
from .solver import SolverConfig, SolverResult, solve, sre

__version__ = "0.1.0"

__all__ = [
    "HyperCube", "MeasurementSet", "add_noise", "adjoint", "err", "forward", "mur",
    "ConfigError", "DimensionError", "FormatError", "NumericalError", "SpftiError",
    "PhantomSpec", "generate_phantom",
    "LevelPartition", "Mask", "SamplingPattern", "SamplingProfile", "allocate_samples",
    "multilevel_coherence", "sampling_profile", "spatial_partition", "spectral_partition",
    "SolverConfig", "SolverResult", "solve", "sre",
]
