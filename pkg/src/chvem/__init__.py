"""Nonconforming virtual element solver for the 2D Cahn-Hilliard equation."""

__version__ = "0.1.0"

from .mesh import (Mesh, MeshStats, MeshValidationError, generate_criss,
                   generate_voronoi, load_mesh, mesh_stats, save_mesh)
from .projections import (DofLayout, ElementProjections, build_cell_projections,
                          build_dof_layout, build_projections, dofs_of_function)
from .assembly import GlobalForms, SemilinearEvaluator, assemble_mass_and_stiffness
from .timestepping import (ButcherPair, NewtonError, SimulationState, StepFailure,
                           csrk1, csrk2, energy, mass, newton_solve, run, step)
from .experiments import (ErrorReport, ManufacturedSolution, compute_errors,
                          run_convergence, test1_exact, test2_initial,
                          test3_initial, test4_initial, zero_contour_metrics)

__all__ = [
    "Mesh", "MeshStats", "MeshValidationError", "generate_criss",
    "generate_voronoi", "load_mesh", "mesh_stats", "save_mesh",
    "DofLayout", "ElementProjections", "build_cell_projections",
    "build_dof_layout", "build_projections", "dofs_of_function",
    "GlobalForms", "SemilinearEvaluator", "assemble_mass_and_stiffness",
    "ButcherPair", "NewtonError", "SimulationState", "StepFailure",
    "csrk1", "csrk2", "energy", "mass", "newton_solve", "run", "step",
    "ErrorReport", "ManufacturedSolution", "compute_errors", "run_convergence",
    "test1_exact", "test2_initial", "test3_initial", "test4_initial",
    "zero_contour_metrics",
]
