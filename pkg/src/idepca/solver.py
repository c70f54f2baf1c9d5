"""Method-of-steps integration with impulses and a piecewise constant argument.

Steps never straddle a breakpoint (integers, impulse times and their
tau-shifts) and never exceed tau, so each delayed value comes from finished
history. Dense output is the cubic Hermite interpolant of the RK4 nodes.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import IntegrationError, InvalidProblemError
from .model import InitialData, Problem, validate

INTEGER_SWITCH = "integer-switch"
IMPULSE = "impulse"
PROPAGATED = "propagated"

MESH_TOL = 1e-12
DEFAULT_DEPTH = 2
_PRIORITY = {IMPULSE: 0, INTEGER_SWITCH: 1, PROPAGATED: 2}


@dataclass(frozen=True)
class BreakpointMesh:
    times: tuple
    reasons: tuple  # frozensets, parallel to times

    def __contains__(self, t):
        j = bisect_right(self.times, t + MESH_TOL) - 1
        return j >= 0 and abs(self.times[j] - t) <= MESH_TOL


def _merge(points):
    """Sort (time, reason) pairs and merge times closer than MESH_TOL."""
    points.sort(key=lambda p: (p[0], _PRIORITY[p[1]]))
    times, reasons, keys = [], [], []
    for t, why in points:
        if times and t - times[-1] <= MESH_TOL:
            reasons[-1] = reasons[-1] | {why}
            # keep the most canonical representative (impulse, then integer)
            if _PRIORITY[why] < keys[-1]:
                times[-1] = t
                keys[-1] = _PRIORITY[why]
            continue
        times.append(t)
        reasons.append(frozenset({why}))
        keys.append(_PRIORITY[why])
    return BreakpointMesh(tuple(times), tuple(reasons))


def _mesh_points(t0, horizon, tau, impulse_times, depth):
    points = [(float(n), INTEGER_SWITCH)
              for n in range(math.ceil(t0), math.floor(horizon) + 1)]
    points += [(t, IMPULSE) for t in impulse_times if t0 < t <= horizon]
    if depth > 0:
        seeds = {t0} | {p[0] for p in points}
        for s in seeds:
            for k in range(1, depth + 1):
                u = s + k * tau
                if u > horizon:
                    break
                points.append((u, PROPAGATED))
    return points


def build_mesh(problem: Problem, horizon: float, depth: int = DEFAULT_DEPTH) -> BreakpointMesh:
    if not horizon > problem.t0:
        raise ValueError(f"horizon {horizon!r} must exceed t0 {problem.t0!r}")
    if depth < 0:
        raise ValueError("depth must be >= 0")
    times = [imp.time for imp in problem.impulses(horizon)]
    return _merge(_mesh_points(problem.t0, horizon, problem.tau, times, depth))


def rhs(problem: Problem, t: float, x: float, x_delay: float, x_pca: float) -> float:
    """Right-hand side of the equation solved for x'(t)."""
    from .errors import NegativeCoefficientError

    bv = problem.b_fn(t)
    cv = problem.c_fn(t)
    if bv < -1e-12:
        raise NegativeCoefficientError("b", t, bv)
    if cv < -1e-12:
        raise NegativeCoefficientError("c", t, cv)
    return -(problem.a_fn(t) * x + bv * x_delay + cv * x_pca)


def apply_impulse(x_left: float, b_i: float) -> float:
    """Right value after an impulse.

    Right continuity makes x(t_i) = x(t_i+), so x(t_i+) - x(t_i-) = b_i x(t_i+)
    gives x(t_i+) = x(t_i-) / (1 - b_i).
    """
    if b_i == 1.0:
        raise ZeroDivisionError("impulse coefficient b_i = 1 is excluded")
    return x_left / (1.0 - b_i)


class Trajectory:
    """Piecewise cubic Hermite solution with recorded jumps.

    Segment k covers [nodes[k], nodes[k+1]) and interpolates the right value
    at its start and the left value at its end.
    """

    def __init__(self, nodes, xl, xr, dl, dr, jumps, t0, horizon, tau=None):
        self.nodes = list(nodes)
        self.xl = list(xl)
        self.xr = list(xr)
        self.dl = list(dl)
        self.dr = list(dr)
        self.jumps = dict(jumps)  # time -> (left, right, b_i)
        self.t0 = t0
        self.horizon = horizon
        self.tau = tau

    def __len__(self):
        return len(self.nodes) - 1

    def _segment(self, t):
        k = bisect_right(self.nodes, t) - 1
        return min(k, len(self.nodes) - 2)

    def _check(self, t):
        if not (self.t0 <= t <= self.horizon):
            raise ValueError(f"t={t!r} outside [{self.t0!r}, {self.horizon!r}]")

    def evaluate(self, t: float, side: str = "+") -> float:
        self._check(t)
        if t in self.jumps:
            left, right, _ = self.jumps[t]
            return right if side == "+" else left
        k = self._segment(t)
        nodes = self.nodes
        if t == nodes[k]:
            return self.xr[k]
        if t == nodes[k + 1]:
            return self.xl[k + 1]
        return _kernels.hermite(t, nodes[k], nodes[k + 1], self.xr[k], self.xl[k + 1],
                                self.dr[k], self.dl[k + 1])

    def __call__(self, t, side="+"):
        return self.evaluate(t, side)

    def derivative(self, t: float) -> float:
        """x'(t) from the dense output (right derivative at nodes)."""
        self._check(t)
        k = self._segment(t)
        nodes = self.nodes
        return _kernels.hermite_derivative(t, nodes[k], nodes[k + 1], self.xr[k],
                                           self.xl[k + 1], self.dr[k], self.dl[k + 1])

    def samples(self):
        """(t, x, side) rows: every node, jump times twice ("-" then "+")."""
        rows = []
        for k, t in enumerate(self.nodes):
            if t in self.jumps:
                left, right, _ = self.jumps[t]
                rows.append((t, left, "-"))
                rows.append((t, right, "+"))
            else:
                rows.append((t, self.xr[k], "."))
        return rows

    def values(self, ts, side="+"):
        return np.array([self.evaluate(float(t), side) for t in ts])

    def max_abs(self):
        return max(max(abs(v) for v in self.xl), max(abs(v) for v in self.xr))


@dataclass
class _System:
    """Kernel inputs shared by the impulsive problem and its transform."""

    problem: Problem
    initial: InitialData
    horizon: float
    impulses: list
    breakpoints: tuple
    mult_b: object = None  # callable(mid) -> float, or None for 1
    mult_c: object = None


def step_grid(t0, horizon, breakpoints, h_cap):
    """Nodes from t0 to horizon; each breakpoint gap split into equal steps <= h_cap."""
    stops = [t0] + [t for t in breakpoints if t0 < t < horizon] + [horizon]
    nodes = [t0]
    for lo, hi in zip(stops, stops[1:]):
        gap = hi - lo
        if gap < MESH_TOL:
            raise IntegrationError(
                f"step size underflow: breakpoints {lo!r} and {hi!r} are closer than {MESH_TOL}")
        n = max(1, math.ceil(gap / h_cap - 1e-9))
        h = gap / n
        nodes.extend(lo + j * h for j in range(1, n))
        nodes.append(hi)
    return nodes


def _run(system: _System, h_max: float) -> Trajectory:
    problem = system.problem
    tau = problem.tau
    nodes = step_grid(problem.t0, system.horizon, system.breakpoints, min(h_max, tau))
    n = len(nodes)
    node_arr = np.asarray(nodes, dtype=np.float64)
    index = {t: k for k, t in enumerate(nodes)}

    has_jump = np.zeros(n, dtype=np.uint8)
    jump_coef = np.zeros(n)
    for imp in system.impulses:
        k = index[imp.time]
        has_jump[k] = 1
        jump_coef[k] = imp.coeff
    is_break = np.zeros(n, dtype=np.uint8)
    for t in system.breakpoints:
        if t in index:
            is_break[index[t]] = 1

    mids = 0.5 * (node_arr[:-1] + node_arr[1:])
    mult_b = np.ones(n)
    mult_c = np.ones(n)
    if system.mult_b is not None:
        mult_b[:-1] = [system.mult_b(float(m)) for m in mids]
    if system.mult_c is not None:
        mult_c[:-1] = [system.mult_c(float(m)) for m in mids]

    xl = np.empty(n)
    xr = np.empty(n)
    dl = np.zeros(n)  # dl[0] is never written: no segment ends at t0
    dr = np.empty(n)
    _kernels.integrate_steps(
        node_arr, has_jump, jump_coef, is_break, mult_b, mult_c,
        problem.a_fn.kernel_args, problem.b_fn.kernel_args, problem.c_fn.kernel_args,
        system.initial.fn.kernel_args, tau, problem.t0, xl, xr, dl, dr)

    jumps = {imp.time: (float(xl[index[imp.time]]), float(xr[index[imp.time]]), imp.coeff)
             for imp in system.impulses}
    return Trajectory(nodes, xl.tolist(), xr.tolist(), dl.tolist(), dr.tolist(), jumps,
                      problem.t0, system.horizon, tau)


def integrate(problem: Problem, initial: InitialData, horizon: float,
              h_max: float = 1e-2, depth: int = DEFAULT_DEPTH) -> Trajectory:
    """Integrate from t0 to horizon with fixed-step RK4 and exact impulse handling."""
    report = validate(problem, horizon, initial)
    if not report.ok:
        raise InvalidProblemError(report)
    if not h_max > 0:
        raise ValueError("h_max must be positive")
    mesh = build_mesh(problem, horizon, depth)
    system = _System(problem, initial, horizon, problem.impulses(horizon), mesh.times)
    return _run(system, h_max)


__all__ = ["BreakpointMesh", "Trajectory", "build_mesh", "rhs", "apply_impulse",
           "integrate", "step_grid", "INTEGER_SWITCH", "IMPULSE", "PROPAGATED"]
