"""Nonconforming immersed finite element methods for elliptic interface problems."""

from .assembly import (
    AssembledSystem,
    AssemblyError,
    Context,
    SolverError,
    assemble,
    assemble_rhs,
    build_context,
    build_jump_correction,
    build_lifting_block,
    lift_trace,
    solve,
    solve_spd,
)
from .cutting import CutLayout, build_layout
from .experiments import (
    ConvergenceTable,
    basis_stress_test,
    emit,
    error_norms,
    interpolation_convergence,
    run_convergence,
)
from .geometry import (
    INTERFACE,
    INTERIOR_MINUS,
    INTERIOR_PLUS,
    CutElement,
    GeometryError,
    LevelSet,
    MeshResolutionError,
    build_cut,
    classify_element,
    cut_from_chord,
    edge_cut,
    side_of_cut,
)
from .ife_space import (
    CR,
    RQ1,
    LocalIFEBasis,
    LocalPoly,
    UnisolvenceError,
    d_functional,
    ife_local_basis_cr_sm,
    ife_local_basis_direct,
    interpolate_ife,
    jump_correction_local,
    standard_local_basis,
)
from .mesh import DofMap, UnfittedMesh, build_uniform_rect, build_uniform_tri, interface_edges
from .problems import (
    ProblemSpec,
    ValidationError,
    example1,
    example2,
    example3,
    example4,
    get_example,
    validate,
)

__all__ = [
    "CR",
    "RQ1",
    "AssembledSystem",
    "AssemblyError",
    "Context",
    "ConvergenceTable",
    "CutElement",
    "CutLayout",
    "DofMap",
    "GeometryError",
    "INTERFACE",
    "INTERIOR_MINUS",
    "INTERIOR_PLUS",
    "LevelSet",
    "LocalIFEBasis",
    "LocalPoly",
    "MeshResolutionError",
    "ProblemSpec",
    "SolverError",
    "UnfittedMesh",
    "UnisolvenceError",
    "ValidationError",
    "assemble",
    "assemble_rhs",
    "basis_stress_test",
    "build_context",
    "build_cut",
    "build_jump_correction",
    "build_layout",
    "build_lifting_block",
    "build_uniform_rect",
    "build_uniform_tri",
    "classify_element",
    "cut_from_chord",
    "d_functional",
    "edge_cut",
    "emit",
    "error_norms",
    "example1",
    "example2",
    "example3",
    "example4",
    "get_example",
    "ife_local_basis_cr_sm",
    "ife_local_basis_direct",
    "interface_edges",
    "interpolate_ife",
    "interpolation_convergence",
    "jump_correction_local",
    "lift_trace",
    "run_convergence",
    "side_of_cut",
    "solve",
    "solve_spd",
    "standard_local_basis",
    "validate",
]
