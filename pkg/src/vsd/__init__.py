"""Variable-exponent sub-diffusion: forward solver, spectral oracle and source inversion."""

from .grid import GridField, build_grid, region_mask
from .inversion import (
    InversionConfig,
    InversionSetup,
    apply_G,
    apply_Gstar,
    iterative_thresholding,
    nesterov_tpg,
    tv_prox,
)
from .kernel import ExponentProfile, KernelSplit
from .timestep import PowerBeta, SourceSpec, TimeGrid, solve_adjoint, solve_forward

__version__ = "0.1.0"

__all__ = [
    "ExponentProfile",
    "GridField",
    "InversionConfig",
    "InversionSetup",
    "KernelSplit",
    "PowerBeta",
    "SourceSpec",
    "TimeGrid",
    "apply_G",
    "apply_Gstar",
    "build_grid",
    "iterative_thresholding",
    "nesterov_tpg",
    "region_mask",
    "solve_adjoint",
    "solve_forward",
    "tv_prox",
]
