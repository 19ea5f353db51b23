"""Matrix inversion by quantum singular value transformation on a state-vector simulator.

Modules
-------
numerics     dense SVD, pseudoinverse, double-exponential fitting
statevector  register layout, gates, circuits, post-selection, sampling
blockenc     block encodings of banded matrices and a dilation reference
invpoly      Chebyshev approximation of 1/x and QSP phase factors
qsvt         QSVT circuits and the linear-system solve
pde          heat, Carleman/Burgers and random tridiagonal problem builders
cli          command-line driver
"""
from qlinsolve.errors import (
    ConditioningError,
    ConversionError,
    FitError,
    InvalidInputError,
    NonConvergenceError,
    PostSelectionError,
    QLinSolveError,
    ResourceLimitError,
    StabilityError,
)
from qlinsolve.kernels import BACKEND
from qlinsolve.qsvt import PreparedSolver, SolveReport, solve_linear_system

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ConditioningError",
    "ConversionError",
    "FitError",
    "InvalidInputError",
    "NonConvergenceError",
    "PostSelectionError",
    "PreparedSolver",
    "QLinSolveError",
    "ResourceLimitError",
    "SolveReport",
    "StabilityError",
    "solve_linear_system",
]
