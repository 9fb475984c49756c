"""hp-DG discretisation of H2-type problems with additive Schwarz preconditioners."""
from .basis import DofMap, PolySpace, QuadratureRule, eval_basis, gauss_rule, make_poly_space
from .forms import (BrokenNormReport, CoercivityError, ExactSolution, PenaltyConfig, assemble_ah,
                    assemble_jump_form, assemble_load_biharmonic_style, broken_norms, penalty)
from .hjb import (ControlGrid, HJBDiscretization, NewtonReport, build_control_grid, evaluate_F_gamma,
                  manufactured_problem, semismooth_newton)
from .mesh import FaceInfo, Mesh, NestedHierarchy, SubdomainSpec, build_hierarchy, build_uniform_mesh
from .schwarz import (Injection, SchwarzPreconditioner, build_coarse_injection, build_preconditioner,
                      condition_number_of_P)
from .solvers import SolveReport, dense_eig, dense_spd_solve, gmres_left, pcg

__all__ = [
    "BrokenNormReport", "CoercivityError", "ControlGrid", "DofMap", "ExactSolution", "FaceInfo",
    "HJBDiscretization", "Injection", "Mesh", "NestedHierarchy", "NewtonReport", "PenaltyConfig",
    "PolySpace", "QuadratureRule", "SchwarzPreconditioner", "SolveReport", "SubdomainSpec",
    "assemble_ah", "assemble_jump_form", "assemble_load_biharmonic_style", "broken_norms",
    "build_coarse_injection", "build_control_grid", "build_hierarchy", "build_preconditioner",
    "build_uniform_mesh", "condition_number_of_P", "dense_eig", "dense_spd_solve", "eval_basis",
    "evaluate_F_gamma", "gauss_rule", "gmres_left", "make_poly_space", "manufactured_problem",
    "pcg", "penalty", "semismooth_newton",
]
__version__ = "0.1.0"
