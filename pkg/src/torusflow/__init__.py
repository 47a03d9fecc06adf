"""Graph gradient flows on cubic discretizations of the flat torus.

Total variation flow in any dimension, Allen-Cahn flows in one dimension,
the piecewise-constant and piecewise-linear embeddings that connect lattice
functions with functions on the torus, and suites that check the identities
and estimates linking the discrete and continuum problems.
"""

__version__ = "0.1.0"

from .grid import TorusGrid, build_grid
from .calculus import (
    EdgeField,
    GridFunction,
    PiecewiseConstantField,
    ac_h,
    continuum_tv_pc,
    dirichlet_h,
    edge_inner,
    embed_pc,
    graph_gradient,
    graph_laplacian,
    inner_h,
    potential_h,
    project_pc,
    tv_h,
)
from .gamma import GammaOperator, gamma_apply, gamma_exp, gamma_solve, gamma_sqrt_apply
from .interp import PiecewiseLinearField, induced_inner, l2_project, lin_embed, nodal_interpolate
from .trajectory import Trajectory
from .tvflow import PlateauProfile, plateau_oracle_1d, tv_flow_mm, tv_prox
from .acflow import PotentialSpec, dac_flow, mdac_flow

__all__ = [
    "TorusGrid",
    "build_grid",
    "EdgeField",
    "GridFunction",
    "PiecewiseConstantField",
    "ac_h",
    "continuum_tv_pc",
    "dirichlet_h",
    "edge_inner",
    "embed_pc",
    "graph_gradient",
    "graph_laplacian",
    "inner_h",
    "potential_h",
    "project_pc",
    "tv_h",
    "GammaOperator",
    "gamma_apply",
    "gamma_exp",
    "gamma_solve",
    "gamma_sqrt_apply",
    "PiecewiseLinearField",
    "induced_inner",
    "l2_project",
    "lin_embed",
    "nodal_interpolate",
    "Trajectory",
    "PlateauProfile",
    "plateau_oracle_1d",
    "tv_flow_mm",
    "tv_prox",
    "PotentialSpec",
    "dac_flow",
    "mdac_flow",
]
