"""Normal form reduction toolkit for the periodic-box Kawahara equation."""

__version__ = "0.1.0"

from .data import initial_data
from .nfe import NfeConfig, NormalFormSolver, picard_solve, validate_contraction_params
from .operators import BilinearSpec, CutoffChain, apply_bilinear, eval_level, eval_term
from .reference import RefConfig, ReferenceSolver
from .spectral import FrequencyGrid, SpectralState, hs_norm
from .trees import enumerate_chronicles

__all__ = [
    "BilinearSpec",
    "CutoffChain",
    "FrequencyGrid",
    "NfeConfig",
    "NormalFormSolver",
    "RefConfig",
    "ReferenceSolver",
    "SpectralState",
    "apply_bilinear",
    "enumerate_chronicles",
    "eval_level",
    "eval_term",
    "hs_norm",
    "initial_data",
    "picard_solve",
    "validate_contraction_params",
]
