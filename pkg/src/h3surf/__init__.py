"""Surfaces in the Heisenberg group H3: fundamental forms, Beltrami operators,
finite-type fitting and the two families of surfaces ruled by geodesics."""

__version__ = "0.1.0"

from .charts import GraphChart, ParametricChart, S1Chart, S2Chart, TransformedChart, cylinder
from .core import Isometry, group_mul, line_is_geodesic
from .expr import parse, to_text
from .geometry import DegenerateChartError, mean_curvature, surface_data, tension_field
from .laplace import GridSpec, beltrami_identity_check, finite_type_fit, scalar_beltrami
from .pde import ConvergenceError, PdeProblem, pde_solve
from .ruled import S1Params, S2Params, build_a_from_eq37, eq_residual, s1_classify, s2_solve_t

__all__ = [
    "ConvergenceError",
    "DegenerateChartError",
    "GraphChart",
    "GridSpec",
    "Isometry",
    "ParametricChart",
    "PdeProblem",
    "S1Chart",
    "S1Params",
    "S2Chart",
    "S2Params",
    "TransformedChart",
    "beltrami_identity_check",
    "build_a_from_eq37",
    "cylinder",
    "eq_residual",
    "finite_type_fit",
    "group_mul",
    "line_is_geodesic",
    "mean_curvature",
    "parse",
    "pde_solve",
    "s1_classify",
    "s2_solve_t",
    "scalar_beltrami",
    "surface_data",
    "tension_field",
    "to_text",
]
