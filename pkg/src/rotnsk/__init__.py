"""Pseudospectral simulation and frequency analysis of the rotating
compressible Navier-Stokes-Korteweg system on a periodic box."""

from .dyadic import DyadicDecomposition, build_dyadic_partition, dyadic_project, low_cutoff
from .errors import (
    BlockRangeError,
    ConfigurationError,
    ExpmOverflowError,
    GridMismatchError,
    InadmissibleDensityError,
    NonFiniteError,
    ResolutionError,
    RotNSKError,
    SupportError,
    SymmetryError,
    UnresolvedSupportWarning,
)
from .grid import FlowState, GridSpec, SpectralField, forward_transform, inverse_transform
from .linear import assemble_mode_matrix, propagate_linear
from .nonlinear import eval_nonlinearity, nonlinear_terms
from .norms import NormSpec, TruncationBand, besov_norm, chemin_lerner_norm, fourier_besov_norm
from .params import PhysParams, PressureLaw, eval_pressure_helpers
from .solver import AprioriTracker, SolverConfig, etd_step, global_run, picard_local_solve, track_apriori

__version__ = "0.1.0"

__all__ = [
    "AprioriTracker",
    "BlockRangeError",
    "ConfigurationError",
    "DyadicDecomposition",
    "ExpmOverflowError",
    "FlowState",
    "GridMismatchError",
    "GridSpec",
    "InadmissibleDensityError",
    "NonFiniteError",
    "NormSpec",
    "PhysParams",
    "PressureLaw",
    "ResolutionError",
    "RotNSKError",
    "SolverConfig",
    "SpectralField",
    "SupportError",
    "SymmetryError",
    "TruncationBand",
    "UnresolvedSupportWarning",
    "assemble_mode_matrix",
    "besov_norm",
    "build_dyadic_partition",
    "chemin_lerner_norm",
    "dyadic_project",
    "etd_step",
    "eval_nonlinearity",
    "eval_pressure_helpers",
    "fourier_besov_norm",
    "forward_transform",
    "global_run",
    "inverse_transform",
    "low_cutoff",
    "nonlinear_terms",
    "picard_local_solve",
    "propagate_linear",
    "track_apriori",
]
