"""Simulation and verification toolkit for Hilbert-space SPDEs driven by symmetric
alpha-stable cylindrical noise."""

__version__ = "0.1.0"

from .coefficients import (ConstantDiffusion, DiagonalSigmoidDiffusion, SigmoidDrift, ZeroDiffusion,
                           ZeroDrift, decay_profile)
from .hilbert import GalerkinModel, HSOperator
from .rng import PathStreams, make_generator
from .sample_path import SamplePath
from .spde_solver import (InitialLaw, Scenario, Scheme, convergence_study, mild_solve,
                          yosida_solve)
from .stable_noise import NoisePath, StableConstants, sample_isotropic_increment, sample_noise_path

__all__ = [
    "ConstantDiffusion", "DiagonalSigmoidDiffusion", "GalerkinModel", "HSOperator", "InitialLaw",
    "NoisePath", "PathStreams", "SamplePath", "Scenario", "Scheme", "SigmoidDrift",
    "StableConstants", "ZeroDiffusion", "ZeroDrift", "__version__", "convergence_study",
    "decay_profile", "make_generator", "mild_solve", "sample_isotropic_increment",
    "sample_noise_path", "yosida_solve",
]
