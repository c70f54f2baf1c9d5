"""Impulse removal by the jump product.

Multiplying a solution by P(t) = prod_{T < t_j <= t} (1 - b_j) turns the
impulsive equation into a continuous one with coefficients

    B(t) = prod_{t - tau < t_j <= t} (1 - b_j) * b(t)
    C(t) = prod_{[t - 1] < t_j <= t} (1 - b_j) * c(t)

and the same a(t). Only impulses after t0 act on solutions, so products
are taken over impulses in (t0, oo).
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .errors import InvalidProblemError
from .model import ImpulseSchedule, InitialData, Problem, enumerate_impulses, validate
from .solver import DEFAULT_DEPTH, Trajectory, _run, _System, build_mesh


def jump_product_value(schedule: ImpulseSchedule, T: float, t: float) -> float:
    """prod over impulses with T < t_j <= t of (1 - b_j); 1 when empty."""
    if t < T:
        raise ValueError(f"need t >= T, got T={T!r}, t={t!r}")
    value = 1.0
    for imp in enumerate_impulses(schedule, T, t):
        value *= 1.0 - imp.coeff
    return value


class JumpProduct:
    """Cached jump product from reference time T, valid up to t_max."""

    def __init__(self, schedule: ImpulseSchedule, T: float, t_max: float):
        self.T = T
        self.t_max = t_max
        impulses = enumerate_impulses(schedule, T, t_max)
        self.times = [imp.time for imp in impulses]
        self.partial = [1.0]
        for imp in impulses:
            self.partial.append(self.partial[-1] * (1.0 - imp.coeff))

    def __call__(self, t: float) -> float:
        if t < self.T or t > self.t_max:
            raise ValueError(f"t={t!r} outside [{self.T!r}, {self.t_max!r}]")
        return self.partial[bisect_right(self.times, t)]


def _clip(problem, lo):
    return max(lo, problem.t0)


def big_b(problem: Problem, t: float) -> float:
    """B(t): b(t) times the jump product over (t - tau, t]."""
    if t < problem.t0:
        raise ValueError("B(t) is defined for t >= t0")
    return jump_product_value(problem.schedule, _clip(problem, t - problem.tau), t) * problem.b_fn(t)


def big_c(problem: Problem, t: float) -> float:
    """C(t): c(t) times the jump product over ([t - 1], t]."""
    if t < problem.t0:
        raise ValueError("C(t) is defined for t >= t0")
    lo = math.floor(t) - 1.0
    return jump_product_value(problem.schedule, _clip(problem, lo), t) * problem.c_fn(t)


@dataclass(frozen=True)
class TransformedProblem:
    """Impulse-free equation y' + a y + B y(t - tau) + C y([t - 1]) = 0."""

    source: Problem

    @property
    def tau(self):
        return self.source.tau

    @property
    def t0(self):
        return self.source.t0

    def a(self, t):
        return self.source.a_fn(t)

    def B(self, t):
        return big_b(self.source, t)

    def C(self, t):
        return big_c(self.source, t)

    def b_factor(self, t):
        return jump_product_value(self.source.schedule, _clip(self.source, t - self.tau), t)

    def c_factor(self, t):
        return jump_product_value(self.source.schedule,
                                  _clip(self.source, math.floor(t) - 1.0), t)

    def integrate(self, initial: InitialData, horizon: float, h_max: float = 1e-2,
                  depth: int = DEFAULT_DEPTH) -> Trajectory:
        """Integrate on the mesh of the impulsive problem (B, C jump there)."""
        mesh = build_mesh(self.source, horizon, max(depth, 1))
        system = _System(self.source, initial, horizon, [], mesh.times,
                         mult_b=self.b_factor, mult_c=self.c_factor)
        return _run(system, h_max)


def transformed_problem(problem: Problem) -> TransformedProblem:
    return TransformedProblem(problem)


class MappedTrajectory:
    """y = P x (forward) or x = y / P (inverse) evaluated lazily."""

    def __init__(self, base: Trajectory, product: JumpProduct, direction: str):
        if direction not in ("forward", "inverse"):
            raise ValueError("direction must be 'forward' or 'inverse'")
        self.base = base
        self.product = product
        self.direction = direction
        self.t0 = base.t0
        self.horizon = base.horizon

    def _factor(self, t, side):
        if side == "-":
            # left limit of the right-continuous product
            j = bisect_right(self.product.times, t)
            if j and self.product.times[j - 1] == t:
                return self.product.partial[j - 1]
        return self.product(t)

    def evaluate(self, t: float, side: str = "+") -> float:
        x = self.base.evaluate(t, side)
        p = self._factor(t, side)
        return p * x if self.direction == "forward" else x / p

    __call__ = evaluate


def map_trajectory(traj: Trajectory, schedule: ImpulseSchedule, T: float,
                   direction: str = "forward") -> MappedTrajectory:
    return MappedTrajectory(traj, JumpProduct(schedule, T, traj.horizon), direction)


@dataclass(frozen=True)
class IdentityReport:
    max_deviation: float
    scale: float
    tol: float
    passed: bool


def verify_jump_identity(problem: Problem, initial: InitialData, horizon: float,
                    tol: float = 1e-6, h_max: float = 1e-2, n_samples: int = 2001,
                    depth: int = DEFAULT_DEPTH) -> IdentityReport:
    """Integrate both equations and compare P x with y on a sample grid (T = t0)."""
    report = validate(problem, horizon, initial)
    if not report.ok:
        raise InvalidProblemError(report)
    x = _impulsive(problem, initial, horizon, h_max, depth)
    y = transformed_problem(problem).integrate(initial, horizon, h_max, depth)
    mapped = map_trajectory(x, problem.schedule, problem.t0, "forward")
    grid = set(np.linspace(problem.t0, horizon, n_samples).tolist())
    grid.update(x.jumps)
    dev = 0.0
    ymax = 0.0
    for t in sorted(grid):
        for side in ("-", "+"):
            yt = y.evaluate(t, side)
            dev = max(dev, abs(mapped.evaluate(t, side) - yt))
            ymax = max(ymax, abs(yt))
    return IdentityReport(dev, ymax, tol, dev <= tol * (1.0 + ymax))


def _impulsive(problem, initial, horizon, h_max, depth):
    mesh = build_mesh(problem, horizon, max(depth, 1))
    system = _System(problem, initial, horizon, problem.impulses(horizon), mesh.times)
    return _run(system, h_max)


__all__ = ["jump_product_value", "JumpProduct", "big_b", "big_c", "TransformedProblem",
           "transformed_problem", "map_trajectory", "MappedTrajectory", "verify_jump_identity",
           "IdentityReport"]
