"""Averaged occupational-measure LP relaxations and near-optimal feedback
for singularly perturbed long-run average optimal control problems."""

from .averaging import (DiscreteMeasure, DualCertificate, GridSpec,
                        StructuredSolution, build_inner_lp, build_outer_lp,
                        hamiltonian_sigma, solve_averaged, verify_solution)
from .basis import MonomialBasis, make_basis
from .control import FeedbackLaw, SearchConfig, feedback, optimality_residual
from .errors import (DomainViolation, GridTooCoarse, IterationLimit,
                     NoPeriodDetected, RankDeficiencyWarning, ScheduleExhausted,
                     ViabilityViolation)
from .lp import LinearProgram, LpSolution, LpStatus, SolveOptions, price_columns, solve
from .model import (Box, ControlProblem, check_contraction, eval_dynamics,
                    get_problem, problem_keys, register_problem)
from .sim import (AveragedDynamics, MomentReport, OccupationalEstimate,
                  ScheduleParams, Trajectory, estimate_period, g_tilde,
                  integrate_associated, integrate_averaged, integrate_sp,
                  long_run_average, occupational_measure, prefix_average,
                  sp_occupational_measure, sp_schedule_control)

__all__ = [
    "Box", "ControlProblem", "check_contraction", "eval_dynamics",
    "get_problem", "problem_keys", "register_problem",
    "MonomialBasis", "make_basis",
    "LinearProgram", "LpSolution", "LpStatus", "SolveOptions", "price_columns",
    "solve",
    "GridSpec", "DiscreteMeasure", "DualCertificate", "StructuredSolution",
    "build_outer_lp", "build_inner_lp", "solve_averaged", "hamiltonian_sigma",
    "verify_solution",
    "FeedbackLaw", "SearchConfig", "feedback", "optimality_residual",
    "Trajectory", "OccupationalEstimate", "ScheduleParams", "MomentReport",
    "AveragedDynamics", "integrate_associated", "integrate_averaged",
    "integrate_sp", "sp_schedule_control", "occupational_measure", "g_tilde",
    "long_run_average", "estimate_period", "sp_occupational_measure",
    "prefix_average",
    "DomainViolation", "GridTooCoarse", "IterationLimit", "NoPeriodDetected",
    "RankDeficiencyWarning", "ScheduleExhausted", "ViabilityViolation",
    "__version__",
]

__version__ = "0.1.0"
