"""Variational thin-film energy: elasticity with mismatch strain, discontinuous
surface tension, gradient descent over profiles, and corner analysis."""

__version__ = "0.1.0"

from .elasticity import BoundaryMode, ElasticState, Materials, solve_equilibrium, solve_transmission_formulation
from .energy import EnergyBreakdown, Tensions, beta, theta_star, total_energy
from .flow import FlowConfig, minimize, shape_gradient
from .geometry import Profile, make_profile, mesh_subgraph, zero_set
from .pencil import SectorSpec, assemble_pencil, predicted_decay, singular_exponents

__all__ = [
    "BoundaryMode",
    "ElasticState",
    "EnergyBreakdown",
    "FlowConfig",
    "Materials",
    "Profile",
    "SectorSpec",
    "Tensions",
    "assemble_pencil",
    "beta",
    "make_profile",
    "mesh_subgraph",
    "minimize",
    "predicted_decay",
    "shape_gradient",
    "singular_exponents",
    "solve_equilibrium",
    "solve_transmission_formulation",
    "theta_star",
    "total_energy",
    "zero_set",
]
