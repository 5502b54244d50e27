"""Finite-difference evolution of the anisotropic degenerate equation."""
from . import backend
from .exact import (AnisoCone, IsotropicBarenblatt, TravellingWave, barenblatt_with_mass,
                    exact_aniso_cone, exact_isotropic_barenblatt, exact_travelling_wave)
from .grid import BOUNDARY_CODES, Field, Grid, GridError, SolverConfig, Trajectory
from .io import read_snapshot, read_trajectory, write_snapshot, write_trajectory
from .measures import centroid, mass, sup, support_box, touches_boundary
from .residual import Bump, ResidualReport, random_bumps, weak_residual
from .scheme import (NumericalAbort, RunLog, StabilityError, adaptive_dt, face_flux, run,
                     step)

__all__ = [
    "AnisoCone", "BOUNDARY_CODES", "Bump", "Field", "Grid", "GridError", "IsotropicBarenblatt",
    "NumericalAbort", "ResidualReport", "RunLog", "SolverConfig", "StabilityError",
    "Trajectory", "TravellingWave", "adaptive_dt", "backend", "barenblatt_with_mass",
    "centroid", "exact_aniso_cone", "exact_isotropic_barenblatt", "exact_travelling_wave",
    "face_flux", "mass", "random_bumps", "read_snapshot", "read_trajectory", "run", "step",
    "sup", "support_box", "touches_boundary", "weak_residual", "write_snapshot",
    "write_trajectory",
]
