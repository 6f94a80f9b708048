"""Greedy selection of representative points by kernel discrepancy minimisation."""

__version__ = "0.1.0"

from .candidates import CandidateSet
from .discrepancy import EmpiricalMeasure, GramOperator, SelectionState, mmd_squared, state_init, state_update
from .estimator import KernelQuantizer, build_setup
from .exceptions import ConfigurationError, DataError, DegenerateDataError, QuantError, SizeGuardError
from .io import DiagnosticReport, diagnose, load_candidates, load_mixture, read_result, write_result
from .kernels import KernelSpec, SteinKernel, evaluate, gram, median_heuristic, stein_evaluate
from .sdr import sdr_assemble, sdr_round, sdr_solve_lowrank, solve_sdr
from .selectors import (
    SelectionConfig, SelectionResult, batch_schedule, select, select_minibatch, select_myopic,
    select_nonmyopic, select_oneshot, select_sdr,
)
from .solvers import IqpProblem, IqpSolution, solve, solve_branch_bound, solve_exhaustive, solve_simplex_qp
from .target import GaussianMixture, ScoreTarget, TargetModel, double_integral, kernel_mean, random_mixture, score

__all__ = [name for name in dir() if not name.startswith("_")]
