"""Parallel-in-time eddy-current solver.

Explicit-Euler fine propagation on a Schur-reduced ODE, implicit-Euler
coarse propagation on the full DAE, combined by the Parareal iteration.
"""

from .excitation import ExcitationSignal
from .model import (
    Grid2D,
    Materials,
    SemiDiscreteSystem,
    PartitionedSystem,
    SchurReducedSystem,
    assemble,
    partition,
    reduce_schur,
    reconstruct_nc,
    window_transformer_grid,
)
from .integrators import (
    TimeGrid,
    ImplicitOperator,
    implicit_euler_step,
    explicit_euler_step,
    propagate_fine,
    propagate_coarse,
    stability_bound,
    StabilityError,
)
from .parareal import PararealConfig, PararealRun, run_parareal, check_convergence, sequential_reference

__version__ = "0.1.0"
