"""Parametric reduced-order models by matrix interpolation with box clustering.

Local Krylov ROMs are trained on a structured parameter grid, mapped into a
shared reduced space by an SVD basis change and interpolated at new
parameter points. ``pbi`` restricts the interpolation to the grid cell
around the query; ``pbr`` also restricts the basis change to that cell.
"""
from .fom.beam import BeamSpec, build_timoshenko_beam
from .fom.lattice import build_heat_lattice, power_module_layout
from .fom.loads import LoadSignal, evaluate_load
from .fom.mmio import export_system, import_system
from .fom.systems import FirstOrderSystem, ModelError, SecondOrderSystem
from .global_basis import BasisChangeError, BoxCache, GlobalROMSet, build_global_set, precompute_boxes
from .integrate import IntegrationError, TransientSolution, back_project, implicit_euler, newmark, simulate
from .interpolation import Strategy, WeightVector, euclidean_weights, evaluate, interpolate_system, tpwf_weights
from .krylov import LocalROM, ProjectionBasis, ReductionError, arnoldi_basis, project_system, reduce_point
from .metrics import ErrorSeries, TimingReport, msre, nrmse, timing_report
from .param_space import (
    ExtrapolationError,
    ParameterBox,
    ParameterPoint,
    TrainingGrid,
    box_corners,
    build_grid,
    knn_select,
    sample_lhs,
)

__version__ = "0.1.0"
