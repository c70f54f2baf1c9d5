"""Oscillation criteria evaluated on a finite scan.

Each condition is a window integral of a jump product, a coefficient and
an exponential of the integral of a(t), compared with 1 (limsup form) or 1/e
(liminf form). The limits are estimated by sup/inf over the trailing half of
the scan, so verdicts only ever say "at horizon".
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field

from . import _kernels
from .errors import CriterionError, InvalidProblemError, NegativeCoefficientError
from .exprlang import Program
from .model import Problem, enumerate_impulses, validate

SATISFIED = "SatisfiedAtHorizon"
NOT_SATISFIED = "NotSatisfiedAtHorizon"
CERTIFIED = "OscillationCertified"
INCONCLUSIVE = "Inconclusive"

QUAD_TOL = 1e-10
A_TOL = 1e-12
DEFAULT_MARGIN = 1e-6
INV_E = math.exp(-1.0)


class Antiderivative:
    """A(t) = integral of a from t_base to t, tabulated on a node grid."""

    def __init__(self, a: Program, t_base: float, t_max: float, tol: float = A_TOL,
                 breakpoints=(), spacing: float = 0.25):
        if not t_base < t_max:
            raise ValueError("need t_base < t_max")
        self.a = a
        self.tol = tol
        self.t_base = t_base
        self.t_max = t_max
        pts = {t_base, t_max}
        pts.update(float(n) for n in range(math.ceil(t_base), math.floor(t_max) + 1))
        pts.update(t for t in breakpoints if t_base < t < t_max)
        nodes = sorted(pts)
        fine = [nodes[0]]
        for lo, hi in zip(nodes, nodes[1:]):
            k = max(1, math.ceil((hi - lo) / spacing))
            fine.extend(lo + (hi - lo) * j / k for j in range(1, k))
            fine.append(hi)
        self.nodes = fine
        code, consts = a.kernel_args
        values = [0.0]
        for lo, hi in zip(fine, fine[1:]):
            values.append(values[-1] + _kernels.simpson_program(code, consts, lo, hi, tol))
        self.values = values

    def __call__(self, t: float) -> float:
        if not (self.t_base <= t <= self.t_max):
            raise ValueError(f"t={t!r} outside [{self.t_base!r}, {self.t_max!r}]")
        k = bisect_right(self.nodes, t) - 1
        base = self.nodes[k]
        if t == base:
            return self.values[k]
        code, consts = self.a.kernel_args
        return self.values[k] + _kernels.simpson_program(code, consts, base, t, self.tol)


def cumulative_a(a: Program, t_base: float, t_max: float, tol: float = A_TOL,
                 breakpoints=()) -> Antiderivative:
    return Antiderivative(a, t_base, t_max, tol, breakpoints)


def _pieces(lo, hi, cuts):
    inner = sorted({c for c in cuts if lo < c < hi})
    pts = [lo] + inner + [hi]
    return list(zip(pts, pts[1:]))


def _guard(name, s, v):
    if v < -1e-12:
        raise NegativeCoefficientError(name, s, v)
    return v


def integral_b_between(problem: Problem, A: Antiderivative, lo: float, hi: float,
                       tol: float = QUAD_TOL) -> float:
    """Integral over [lo, hi] of prod_{s-tau<t_j<=s}(1-b_j) b(s) exp(A(s)-A(s-tau)).

    The jump product is piecewise constant; the integral is split wherever s
    or s - tau crosses an impulse time and the factor is taken at each
    piece's midpoint.
    """
    if hi < lo:
        raise ValueError("need lo <= hi")
    if hi == lo:
        return 0.0
    tau = problem.tau
    t0 = problem.t0
    imps = enumerate_impulses(problem.schedule, max(lo - tau, t0), hi)
    cuts = [imp.time for imp in imps] + [imp.time + tau for imp in imps]
    b = problem.b_fn

    def smooth(s):
        return _guard("b", s, b(s)) * math.exp(A(s) - A(s - tau))

    pieces = _pieces(lo, hi, cuts)
    total = 0.0
    for p, q in pieces:
        mid = 0.5 * (p + q)
        factor = 1.0
        for imp in imps:
            if mid - tau < imp.time <= mid:
                factor *= 1.0 - imp.coeff
        piece_tol = tol / (len(pieces) * max(1.0, abs(factor)))
        total += factor * _kernels.adaptive_simpson(smooth, p, q, piece_tol)
    return total


def integral_c_between(problem: Problem, A: Antiderivative, n: int, lo: float, hi: float,
                       tol: float = QUAD_TOL) -> float:
    """Integral over [lo, hi] of prod_{n-1<t_j<=s}(1-b_j) c(s) exp(A(s)-A(n-1))."""
    if hi < lo:
        raise ValueError("need lo <= hi")
    if hi == lo:
        return 0.0
    base = float(n) - 1.0
    imps = enumerate_impulses(problem.schedule, max(base, problem.t0), hi)
    c = problem.c_fn
    a_base = A(base)

    def smooth(s):
        return _guard("c", s, c(s)) * math.exp(A(s) - a_base)

    pieces = _pieces(lo, hi, [imp.time for imp in imps])
    total = 0.0
    for p, q in pieces:
        mid = 0.5 * (p + q)
        factor = 1.0
        for imp in imps:
            if imp.time <= mid:
                factor *= 1.0 - imp.coeff
        piece_tol = tol / (len(pieces) * max(1.0, abs(factor)))
        total += factor * _kernels.adaptive_simpson(smooth, p, q, piece_tol)
    return total


def window_integral_b(problem: Problem, A: Antiderivative, t: float, window_len: float,
                      tol: float = QUAD_TOL) -> float:
    if t - window_len < problem.t0 - 1e-12:
        raise CriterionError(f"window [{t - window_len!r}, {t!r}] starts before t0")
    return integral_b_between(problem, A, t - window_len, t, tol)


def window_integral_c(problem: Problem, A: Antiderivative, n: int, window_len: float,
                      tol: float = QUAD_TOL) -> float:
    if n - 1 < problem.t0:
        raise CriterionError(f"n - 1 = {n - 1} is before t0")
    return integral_c_between(problem, A, n, n + 1 - window_len, n + 1.0, tol)


@dataclass(frozen=True)
class Condition:
    id: str
    label: str
    coefficient: str  # "b" or "c"
    window: str       # "l" (min(tau, 1)), "tau", or "unit"
    mode: str         # "sup" or "inf"
    threshold: float
    requires: str | None = None  # "c_zero" or "b_zero": single-coefficient forms


CONDITIONS = {
    "T2-b": Condition("T2-b", "sup delay window > 1", "b", "l", "sup", 1.0),
    "T2-c": Condition("T2-c", "sup integer window > 1", "c", "l", "sup", 1.0),
    "T3-b": Condition("T3-b", "inf delay window > 1/e", "b", "l", "inf", INV_E),
    "T3-c": Condition("T3-c", "inf integer window > 1/e", "c", "l", "inf", INV_E),
    "C1": Condition("C1", "sup tau window > 1, c = 0", "b", "tau", "sup", 1.0, "c_zero"),
    "C2": Condition("C2", "sup unit window > 1, b = 0", "c", "unit", "sup", 1.0, "b_zero"),
    "C3": Condition("C3", "inf tau window > 1/e, c = 0", "b", "tau", "inf", INV_E, "c_zero"),
    "C4": Condition("C4", "inf unit window > 1/e, b = 0", "c", "unit", "inf", INV_E, "b_zero"),
}


@dataclass(frozen=True)
class Scan:
    start: float
    end: float
    stride: float = 0.05

    def times(self):
        if not self.stride > 0:
            raise CriterionError("scan stride must be positive")
        count = math.floor((self.end - self.start) / self.stride + 1e-9)
        return [self.start + k * self.stride for k in range(count + 1)]

    def integers(self):
        return list(range(math.ceil(self.start), math.floor(self.end) + 1))


def domain_start(problem: Problem) -> float:
    return problem.t0 + max(problem.tau, 2.0)


def default_scan(problem: Problem) -> Scan:
    start = domain_start(problem)
    return Scan(start, start + 50.0, 0.05)


@dataclass(frozen=True)
class CriterionReport:
    condition: str
    label: str
    window_len: float
    times: tuple
    values: tuple
    tail: float
    mode: str
    threshold: float
    margin: float
    verdict: str

    @property
    def satisfied(self):
        return self.verdict == SATISFIED


def _window_len(problem, cond):
    if cond.window == "l":
        return min(problem.tau, 1.0)
    if cond.window == "tau":
        return problem.tau
    return 1.0


def _check_hypothesis(problem, cond):
    if cond.requires == "c_zero" and not (problem.c_is_zero and not problem.b_is_zero):
        raise CriterionError(f"{cond.id} assumes c == 0 and b != 0")
    if cond.requires == "b_zero" and not (problem.b_is_zero and not problem.c_is_zero):
        raise CriterionError(f"{cond.id} assumes b == 0 and c != 0")


def _antiderivative_for(problem, scan, window_lens):
    lo = min(scan.start - max(window_lens) - problem.tau, math.floor(scan.start) - 1.0)
    hi = max(scan.end, math.floor(scan.end) + 1.0)
    return Antiderivative(problem.a_fn, lo, hi)


def _series(problem, cond, scan, A, tol, cache=None):
    wl = _window_len(problem, cond)
    key = (cond.coefficient, wl)
    if cache is not None and key in cache:
        return cache[key]
    if cond.coefficient == "b":
        times = scan.times()
        values = [window_integral_b(problem, A, t, wl, tol) for t in times]
    else:
        times = scan.integers()
        values = [window_integral_c(problem, A, n, wl, tol) for n in times]
    if not times:
        raise CriterionError(f"scan [{scan.start!r}, {scan.end!r}] is empty for {cond.id}")
    result = (tuple(times), tuple(values))
    if cache is not None:
        cache[key] = result
    return result


def _report(problem, cond, scan, margin, A, tol, cache=None):
    times, values = _series(problem, cond, scan, A, tol, cache)
    tail_values = values[len(values) // 2:]
    tail = max(tail_values) if cond.mode == "sup" else min(tail_values)
    verdict = SATISFIED if tail > cond.threshold + margin else NOT_SATISFIED
    return CriterionReport(cond.id, cond.label, _window_len(problem, cond), times, values,
                           tail, cond.mode, cond.threshold, margin, verdict)


def _check_scan(problem, scan):
    if scan.start < domain_start(problem) - 1e-12:
        raise CriterionError(
            f"scan start {scan.start!r} precedes t0 + max(tau, 2) = {domain_start(problem)!r}")
    if scan.end < scan.start:
        raise CriterionError("scan window is empty")


def check_condition(problem: Problem, condition: str, scan: Scan | None = None,
                    margin: float = DEFAULT_MARGIN, tol: float = QUAD_TOL) -> CriterionReport:
    try:
        cond = CONDITIONS[condition]
    except KeyError:
        raise CriterionError(f"unknown condition {condition!r}") from None
    scan = scan or default_scan(problem)
    _check_scan(problem, scan)
    _check_hypothesis(problem, cond)
    A = _antiderivative_for(problem, scan, [_window_len(problem, cond)])
    return _report(problem, cond, scan, margin, A, tol)


@dataclass(frozen=True)
class Summary:
    reports: tuple
    verdict: str
    certified_by: tuple = field(default=())


def applicable_conditions(problem: Problem) -> list[str]:
    ids = ["T2-b", "T2-c", "T3-b", "T3-c"]
    if problem.c_is_zero and not problem.b_is_zero:
        ids += ["C1", "C3"]
    if problem.b_is_zero and not problem.c_is_zero:
        ids += ["C2", "C4"]
    return ids


def check_all(problem: Problem, scan: Scan | None = None, margin: float = DEFAULT_MARGIN,
              tol: float = QUAD_TOL) -> Summary:
    """Run every applicable condition; any satisfied one certifies oscillation."""
    scan = scan or default_scan(problem)
    report = validate(problem, max(scan.end, problem.t0) + 1.0)
    if not report.ok:
        raise InvalidProblemError(report)
    _check_scan(problem, scan)
    ids = applicable_conditions(problem)
    conds = [CONDITIONS[i] for i in ids]
    A = _antiderivative_for(problem, scan, [_window_len(problem, c) for c in conds])
    cache = {}
    reports = tuple(_report(problem, c, scan, margin, A, tol, cache) for c in conds)
    satisfied = tuple(r.condition for r in reports if r.satisfied)
    return Summary(reports, CERTIFIED if satisfied else INCONCLUSIVE, satisfied)


__all__ = ["Antiderivative", "cumulative_a", "window_integral_b", "window_integral_c",
           "integral_b_between", "integral_c_between", "Condition", "CONDITIONS", "Scan",
           "default_scan", "CriterionReport", "check_condition", "check_all", "Summary",
           "applicable_conditions", "SATISFIED", "NOT_SATISFIED", "CERTIFIED",
           "INCONCLUSIVE"]
