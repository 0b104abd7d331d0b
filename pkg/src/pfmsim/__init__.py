"""Impulse-based particle flow map solver for incompressible flow on MAC grids."""
from .grid import (BoundarySpec, ConfigurationError, FaceField, GridDescriptor, Inflow, Outflow,
                   Periodic, SolidWall)
from .particles import ParticleSet, ReinitPolicy
from .poisson import SolverError, build_system, project, solve_mgpcg
from .scenarios import make as make_scenario
from .solver import SimState, SimulationError, SolverConfig, init_state, run, step

__version__ = "0.1.0"

__all__ = [
    "BoundarySpec", "ConfigurationError", "FaceField", "GridDescriptor", "Inflow", "Outflow",
    "Periodic", "SolidWall", "ParticleSet", "ReinitPolicy", "SolverError", "build_system",
    "project", "solve_mgpcg", "make_scenario", "SimState", "SimulationError", "SolverConfig",
    "init_state", "run", "step",
]
