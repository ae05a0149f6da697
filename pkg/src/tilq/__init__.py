"""Solvers and verifiers for time-inconsistent stochastic linear-quadratic control."""

__version__ = "0.1.0"

from .errors import (FeasibilityError, InvalidInputError, ProblemParseError, ProblemValidationError,
                     ResourceLimitError, TilqError, UnsupportedNoiseError, UnsupportedStructureError)
from .feedback import (FeedbackSolution, assert_definite_case, propagate_expanded, reduce_to_standard,
                       solve_feedback)
from .linalg import DEFAULT_TOL, Tolerances, is_psd, pinv, solve_consistency, symmetrize
from .open_loop import (OpenLoopSolution, StandardLQSolution, demonstrate_inconsistency, open_loop_gains,
                        solve_open_loop, solve_standard_lq)
from .problem import (DiscountSpec, InitialPair, Mode, ProblemData, detect_mode, dump_problem,
                      from_discounting, load_problem, make_problem, restrict, validate)
from .simulation import (NoiseModel, NoisePath, PolicySpec, Trajectory, enumerate_paths, evaluate_cost,
                         exact_expected_cost, monte_carlo_cost, simulate, solve_adjoint)
from .verify import VerificationReport, directional_derivative_check, verify_feedback, verify_open_loop

__all__ = [
    "__version__", "FeasibilityError", "InvalidInputError", "ProblemParseError", "ProblemValidationError",
    "ResourceLimitError", "TilqError", "UnsupportedNoiseError", "UnsupportedStructureError",
    "FeedbackSolution", "assert_definite_case", "propagate_expanded", "reduce_to_standard", "solve_feedback",
    "OpenLoopSolution", "StandardLQSolution", "demonstrate_inconsistency", "open_loop_gains",
    "solve_open_loop", "solve_standard_lq", "DiscountSpec", "InitialPair", "Mode", "ProblemData",
    "detect_mode", "dump_problem", "from_discounting", "load_problem", "make_problem", "restrict", "validate",
    "NoiseModel", "NoisePath", "PolicySpec", "Trajectory", "enumerate_paths", "evaluate_cost",
    "exact_expected_cost", "monte_carlo_cost", "simulate", "solve_adjoint", "DEFAULT_TOL", "Tolerances",
    "is_psd", "pinv", "solve_consistency", "symmetrize", "VerificationReport", "directional_derivative_check",
    "verify_feedback", "verify_open_loop",
]
