"""Lowest-order mixed virtual elements for elliptic optimal control with
boundary observations on polygonal meshes."""
from .analysis import (ErrorReport, ReferenceGrid, boundary_flux_error, cell_averages, domain_flux_error,
                       eoc, l2_error_cellwise, reference_error)
from .local import LocalElement, local_div_matrix, local_flux_matrix, local_projector
from .mesh import (GeometryError, MeshError, PolygonalMesh, gen_nonconvex_grid, gen_perturbed_grid,
                   gen_square_grid, generate, load_mesh, save_mesh)
from .ocp import FixedPointConfig, FixedPointError, OcpSolution, fixed_point_solve, project_control
from .problems import BUILTIN, ExactSolution, ProblemData, builtin_problem, manufactured
from .quadrature import TriangulationError, ear_clip, integrate_cell, integrate_edge, polygon_rule
from .saddle import (LinearSolveError, LinearSolveReport, SaddleSystem, assemble, inf_sup_constant,
                     solve_adjoint, solve_state)
from .study import StudyConfig, emit_table, parse_config, run_study

__version__ = "0.1.0"
