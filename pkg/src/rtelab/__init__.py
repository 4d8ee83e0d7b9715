"""Numerical laboratory for the stationary radiative transfer equation in diffusion scaling."""

__version__ = "0.1.0"

from .albedo import (AlbedoMatrix, assemble_ballistic, assemble_full, assemble_single_scattering,
                     diff_norm, operator_norm_l1)
from .grid import PhaseSpaceGrid, build_grid, volume_quadrature
from .media import MediaPair, MediumField, ScaledMedium, make_paper_pair
from .transport import BoundaryFlux, KineticSolution, NonConvergence, solve_transport

__all__ = [
    "AlbedoMatrix", "BoundaryFlux", "KineticSolution", "MediaPair", "MediumField",
    "NonConvergence", "PhaseSpaceGrid", "ScaledMedium", "assemble_ballistic", "assemble_full",
    "assemble_single_scattering", "build_grid", "diff_norm", "make_paper_pair",
    "operator_norm_l1", "solve_transport", "volume_quadrature",
]
