"""Simulation and oscillation analysis for impulsive delay equations with a
piecewise constant argument.

    x'(t) + a(t) x(t) + b(t) x(t - tau) + c(t) x([t - 1]) = 0,  t != t_i
    x(t_i+) - x(t_i-) = b_i x(t_i)
"""

from ._kernels import BACKEND
from .criteria import CERTIFIED, INCONCLUSIVE, Scan, check_all, check_condition
from .detect import classify, find_sign_changes
from .errors import (DomainError, ExprError, IdepcaError, IntegrationError,
                     InvalidProblemError, ParseError)
from .exprlang import compile_expr, parse_expr
from .model import ImpulseSchedule, InitialData, Problem, make_problem, validate
from .solver import Trajectory, build_mesh, integrate
from .transform import big_b, big_c, jump_product_value, transformed_problem, verify_jump_identity

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "CERTIFIED", "INCONCLUSIVE", "DomainError", "ExprError", "IdepcaError",
    "ImpulseSchedule", "InitialData", "IntegrationError", "InvalidProblemError",
    "ParseError", "Problem", "Scan", "Trajectory", "big_b", "big_c", "build_mesh",
    "check_all", "check_condition", "classify", "compile_expr", "find_sign_changes",
    "integrate", "jump_product_value", "make_problem", "parse_expr", "transformed_problem",
    "validate", "verify_jump_identity",
]
