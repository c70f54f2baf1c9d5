"""Problem definition and validation.

The equation handled throughout the package is

    x'(t) + a(t) x(t) + b(t) x(t - tau) + c(t) x([t - 1]) = 0,  t != t_i,
    x(t_i+) - x(t_i-) = b_i x(t_i),

with right-continuous solutions and impulse indices starting at 1.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ExprError
from .exprlang import Const, Expr, Program, is_zero_constant, to_source

INTEGERS = "integers"
ARITHMETIC = "arithmetic"
LIST = "list"


@dataclass(frozen=True)
class ImpulseSchedule:
    """Impulse times t_1 < t_2 < ... and the coefficient formula b_i = coeff(i)."""

    kind: str = LIST
    times: tuple = ()
    first: float = 1.0
    step: float = 1.0
    coeff: Expr = Const(0.0)
    _program: Program = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in (INTEGERS, ARITHMETIC, LIST):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.kind == ARITHMETIC and not (self.first > 0 and self.step > 0):
            raise ValueError("arithmetic schedule needs first > 0 and step > 0")
        if self.kind == LIST:
            times = tuple(float(t) for t in self.times)
            if any(b <= a for a, b in zip(times, times[1:])):
                raise ValueError("impulse times must be strictly increasing")
            object.__setattr__(self, "times", times)
        object.__setattr__(self, "_program", Program(self.coeff))

    @classmethod
    def empty(cls):
        return cls(LIST, ())

    @property
    def is_empty(self):
        return self.kind == LIST and not self.times

    def time(self, i: int) -> float:
        if self.kind == INTEGERS:
            return float(i)
        if self.kind == ARITHMETIC:
            return self.first + (i - 1) * self.step
        return self.times[i - 1]

    def coefficient(self, i: int) -> float:
        return self._program(float(i))

    def indices(self, lo: float, hi: float) -> range:
        """1-based indices i with lo < t_i <= hi."""
        if hi <= lo:
            return range(1, 1)
        if self.kind == LIST:
            return range(bisect_right(self.times, lo) + 1, bisect_right(self.times, hi) + 1)
        if self.kind == INTEGERS:
            first = max(1, math.floor(lo) + 1)
            last = math.floor(hi)
        else:
            first = max(1, math.floor((lo - self.first) / self.step) + 2)
            last = math.floor((hi - self.first) / self.step) + 1
            # floor() of a rounded quotient can be off by one either way
            while first > 1 and self.time(first - 1) > lo:
                first -= 1
            while self.time(first) <= lo:
                first += 1
            while last >= 1 and self.time(last) > hi:
                last -= 1
            while self.time(last + 1) <= hi:
                last += 1
        return range(first, max(first, last + 1))

    def describe(self) -> str:
        if self.kind == INTEGERS:
            times = "integers"
        elif self.kind == ARITHMETIC:
            times = f"arithmetic:{self.first!r},{self.step!r}"
        else:
            times = "list:" + ",".join(repr(t) for t in self.times)
        return f"{times}; b_i = {to_source(self.coeff)}"


@dataclass(frozen=True)
class Impulse:
    index: int
    time: float
    coeff: float


def enumerate_impulses(schedule: ImpulseSchedule, lo: float, hi: float) -> list[Impulse]:
    """All impulses with lo < t_i <= hi in time order. b_i = 1 is an error."""
    if lo > hi:
        raise ValueError("window needs lo <= hi")
    out = []
    for i in schedule.indices(lo, hi):
        b = schedule.coefficient(i)
        if b == 1.0:
            raise DomainError(f"b_i = 1 at i={i}")
        out.append(Impulse(i, schedule.time(i), b))
    return out


def history_domain(t0: float, tau: float) -> float:
    """Left end of the interval on which initial data must be given."""
    return min(t0 - tau, math.floor(t0) - 1.0)


@dataclass(frozen=True)
class Problem:
    a: Expr
    b: Expr
    c: Expr
    tau: float
    t0: float
    schedule: ImpulseSchedule = field(default_factory=ImpulseSchedule.empty)

    def __post_init__(self):
        object.__setattr__(self, "tau", float(self.tau))
        object.__setattr__(self, "t0", float(self.t0))
        for name in ("a", "b", "c"):
            object.__setattr__(self, f"_{name}_prog", Program(getattr(self, name)))

    @property
    def a_fn(self) -> Program:
        return self._a_prog

    @property
    def b_fn(self) -> Program:
        return self._b_prog

    @property
    def c_fn(self) -> Program:
        return self._c_prog

    @property
    def b_is_zero(self) -> bool:
        return is_zero_constant(self.b)

    @property
    def c_is_zero(self) -> bool:
        return is_zero_constant(self.c)

    def impulses(self, horizon: float) -> list[Impulse]:
        """Impulses acting on the solution, i.e. those in (t0, horizon]."""
        return enumerate_impulses(self.schedule, self.t0, horizon)


@dataclass(frozen=True)
class InitialData:
    phi: Expr = Const(1.0)

    def __post_init__(self):
        object.__setattr__(self, "_prog", Program(self.phi))

    @property
    def fn(self) -> Program:
        return self._prog

    def domain_start(self, problem: Problem) -> float:
        return history_domain(problem.t0, problem.tau)


@dataclass(frozen=True)
class Issue:
    code: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    errors: tuple = ()
    warnings: tuple = ()

    @property
    def ok(self) -> bool:
        return not self.errors

    def codes(self):
        return [i.code for i in self.errors + self.warnings]


def validate(problem: Problem, horizon: float,
             initial: InitialData | None = None) -> ValidationReport:
    errors = []
    warnings = []
    if not problem.tau > 0:
        errors.append(Issue("TAU", f"tau must be > 0, got {problem.tau!r}"))
    if not problem.t0 > 0:
        errors.append(Issue("T0", f"t0 must be > 0, got {problem.t0!r}"))
    if not horizon > problem.t0:
        errors.append(Issue("HORIZON", f"horizon {horizon!r} must exceed t0 {problem.t0!r}"))

    # impulse coefficients over the working horizon
    if horizon > problem.t0:
        for i in problem.schedule.indices(problem.t0, horizon):
            try:
                bi = problem.schedule.coefficient(i)
            except ArithmeticError as exc:
                errors.append(Issue("IMPULSE_EVAL", f"b_i at i={i}: {exc}"))
                break
            if bi == 1.0:
                errors.append(Issue("IMPULSE_ONE", f"b_i = 1 at i={i}"))
                break
            if bi > 1.0 and not any(w.code == "IMPULSE_SIGN_FLIP" for w in warnings):
                warnings.append(Issue(
                    "IMPULSE_SIGN_FLIP",
                    f"b_i = {bi!r} > 1 at i={i}: impulses flip the sign, so solutions "
                    "oscillate trivially; the criteria assume b_i < 1"))

    if initial is not None and problem.tau > 0:
        lo = history_domain(problem.t0, problem.tau)
        for s in np.linspace(lo, problem.t0, 200):
            try:
                initial.fn(float(s))
            except ArithmeticError as exc:
                errors.append(Issue("PHI", f"phi({float(s)!r}): {exc}"))
                break

    if horizon > problem.t0:
        grid = np.linspace(problem.t0, horizon, 1000)
        for name, fn in (("b", problem.b_fn), ("c", problem.c_fn)):
            for s in grid:
                try:
                    v = fn(float(s))
                except ArithmeticError as exc:
                    errors.append(Issue(f"{name.upper()}_EVAL", f"{name}({float(s)!r}): {exc}"))
                    break
                if v < 0:
                    errors.append(Issue(f"{name.upper()}_NEGATIVE",
                                        f"{name}({float(s)!r}) = {v!r} < 0"))
                    break
        try:
            problem.a_fn(problem.t0)
            problem.a_fn(float(horizon))
        except ArithmeticError as exc:
            errors.append(Issue("A_EVAL", f"a: {exc}"))

    if problem.b_is_zero and problem.c_is_zero:
        warnings.append(Issue(
            "NO_DELAY_TERMS", "b and c are both zero: the equation is an impulsive ODE "
            "and the oscillation criteria are vacuous"))
    if 0 < problem.tau < 1e-3:
        warnings.append(Issue("SMALL_TAU", "tau < 1e-3: steps are capped by tau, "
                              "integration will be slow"))
    return ValidationReport(tuple(errors), tuple(warnings))


def make_problem(a="0", b="0", c="0", tau=1.0, t0=1.0, times=None, coeff="0",
                 phi="1"):
    """Convenience constructor from source strings.

    ``times`` is None (no impulses), "integers", ("arithmetic", first, step)
    or a sequence of impulse times.
    """
    from .exprlang import parse_expr

    if times is None:
        schedule = ImpulseSchedule.empty()
    elif times == INTEGERS:
        schedule = ImpulseSchedule(INTEGERS, coeff=parse_expr(coeff, "i"))
    elif isinstance(times, tuple) and times and times[0] == ARITHMETIC:
        schedule = ImpulseSchedule(ARITHMETIC, first=times[1], step=times[2],
                                   coeff=parse_expr(coeff, "i"))
    else:
        schedule = ImpulseSchedule(LIST, tuple(times), coeff=parse_expr(coeff, "i"))
    problem = Problem(parse_expr(a), parse_expr(b), parse_expr(c), tau, t0, schedule)
    return problem, InitialData(parse_expr(phi))


__all__ = ["ImpulseSchedule", "Impulse", "Problem", "InitialData", "Issue",
           "ValidationReport", "enumerate_impulses", "history_domain", "validate",
           "make_problem", "ExprError"]
