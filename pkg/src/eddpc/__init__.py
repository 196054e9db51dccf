"""Data-driven predictive control from short data via a kernel-based null-space predictor."""

from .bench import BenchConfig, BenchReport, analytic_table, run_benchmark
from .closed_loop import ClosedLoopLog, check_equivalence, run, run_model_mpc, sample_initial_past
from .estimator import PredictiveController, TrajectoryPredictor
from .exceptions import (
    DegenerateKernelError,
    EddpcError,
    InfeasibleError,
    InputError,
    InsufficientExcitationError,
    SolverError,
)
from .kernel import KernelRep, PredictorP, build_gamma, extract_kernel, preprocess, select_rows
from .lti import LtiSystem, collect, compute_lag, equilibrium_from_input, random_system, simulate
from .ocp import CondensedQp, OcpSpec, assemble, recover_trajectory
from .predictors import Predictor, build_predictor, model_predictor
from .qp import ActiveSetSolver, QpProblem, QpSolution, check_kkt, solve
from .trajectory import SCHEMES, Trajectory, behavior_rank_check, hankel, is_pe, min_data_length, regressor_dim

__version__ = "0.1.0"
