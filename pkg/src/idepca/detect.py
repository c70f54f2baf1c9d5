"""Sign-change detection on simulated trajectories.

A finite run can show sign changes but can never prove that a solution is
eventually of one sign, so the negative verdict is only "sign constant at
horizon".

Zero detection is scale-aware. By default a sample counts as zero when
|x| <= 1e-9 times the local envelope (max |x| within 1 + tau of the sample),
so decaying or growing oscillations are judged against their own size.
Passing ``atol`` uses one fixed absolute threshold instead.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .errors import WindowTooShortError
from .solver import Trajectory

OSCILLATORY = "OscillatoryDetected"
SIGN_CONSTANT = "SignConstantAtHorizon"

TIME_TOL = 1e-10
MIN_WINDOW = 4.0
REL_ZERO = 1e-9


@dataclass(frozen=True)
class OscillationVerdict:
    classification: str
    sign_changes: tuple
    count: int
    last_change: float | None
    zero_touches: tuple
    atol: float | None  # None: local envelope thresholds were used


def default_atol(traj: Trajectory) -> float:
    """Global scale-aware threshold, 1e-9 * (1 + max |x|)."""
    return REL_ZERO * (1.0 + traj.max_abs())


def _running_max(values, lo_idx, hi_idx):
    """max(values[lo:hi]) for each (lo, hi) pair via a sparse table."""
    table = [values]
    width = 1
    while 2 * width <= len(values):
        prev = table[-1]
        table.append(np.maximum(prev[:-width], prev[width:]))
        width *= 2
    length = hi_idx - lo_idx
    level = np.floor(np.log2(np.maximum(length, 1))).astype(int)
    out = np.empty(len(lo_idx))
    for j in np.unique(level):
        sel = level == j
        span = 1 << j
        out[sel] = np.maximum(table[j][lo_idx[sel]], table[j][hi_idx[sel] - span])
    return out


class _Thresholds:
    """Zero threshold per node, fixed or from the local envelope."""

    def __init__(self, traj, atol, tau_hint):
        self.nodes = traj.nodes
        if atol is not None:
            self.fixed = atol
            return
        self.fixed = None
        t = np.asarray(traj.nodes)
        mags = np.maximum(np.abs(np.asarray(traj.xl)), np.abs(np.asarray(traj.xr)))
        half = 1.0 + tau_hint
        lo = np.searchsorted(t, t - half, side="left")
        hi = np.searchsorted(t, t + half, side="right")
        self.per_node = (REL_ZERO * _running_max(mags, lo, hi)).tolist()

    def at_node(self, k):
        return self.fixed if self.fixed is not None else self.per_node[k]

    def at(self, t):
        if self.fixed is not None:
            return self.fixed
        k = min(max(bisect_right(self.nodes, t) - 1, 0), len(self.nodes) - 1)
        return self.per_node[k]


def _sign(v, tol):
    if abs(v) <= tol:
        return 0
    return 1 if v > 0 else -1


def _bisect_root(f, lo, hi, tol):
    """Refine a sign change of f on (lo, hi) to TIME_TOL and |f| <= tol.

    Stops early only when the bracket can no longer be split in binary64.
    """
    flo = f(lo)
    fhi = f(hi)
    while hi - lo > TIME_TOL or min(abs(flo), abs(fhi)) > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm
    return lo if abs(flo) <= abs(fhi) else hi


def _locate(traj, lo, hi, tol):
    """Crossing time between two samples of opposite sign, no flipping jump between."""
    def f(t):
        return traj.evaluate(t, "+") if t != hi else traj.evaluate(t, "-")
    return _bisect_root(f, lo, hi, tol)


def _scan(traj, thresholds):
    changes = []
    touches = []
    last_sign = 0
    last_t = None
    for k, t in enumerate(traj.nodes):
        tol = thresholds.at_node(k)
        if t in traj.jumps:
            left, right, _ = traj.jumps[t]
            samples = ((left, "-"), (right, "+"))
        else:
            samples = ((traj.xr[k], "+"),)
        for v, side in samples:
            s = _sign(v, tol)
            if s == 0:
                touches.append(t)
                continue
            if last_sign and s != last_sign:
                if side == "+" and t in traj.jumps and _sign(traj.jumps[t][0], tol) == last_sign:
                    # the impulse itself flipped the sign (b_i > 1)
                    changes.append(t)
                else:
                    changes.append(_locate(traj, last_t, t, tol))
            last_sign = s
            last_t = t
    return changes, touches


def _tau_hint(traj, tau):
    if tau is not None:
        return tau
    return traj.tau if traj.tau is not None else 1.0


def find_sign_changes(traj: Trajectory, atol: float | None = None,
                      tau: float | None = None) -> list[float]:
    """Sorted sign-change times; zero touches are not sign changes."""
    return _scan(traj, _Thresholds(traj, atol, _tau_hint(traj, tau)))[0]


def zero_threshold(traj: Trajectory, t: float, atol: float | None = None,
                   tau: float | None = None) -> float:
    return _Thresholds(traj, atol, _tau_hint(traj, tau)).at(t)


def classify(traj: Trajectory, atol: float | None = None,
             tau: float | None = None) -> OscillationVerdict:
    """OscillatoryDetected needs >= 2 sign changes, one in the final quarter."""
    span = traj.horizon - traj.t0
    if span < MIN_WINDOW:
        raise WindowTooShortError(f"window of {span!r} time units is shorter than {MIN_WINDOW}")
    changes, touches = _scan(traj, _Thresholds(traj, atol, _tau_hint(traj, tau)))
    recent = traj.t0 + 0.75 * span
    oscillating = len(changes) >= 2 and any(t >= recent for t in changes)
    return OscillationVerdict(
        OSCILLATORY if oscillating else SIGN_CONSTANT,
        tuple(changes), len(changes), changes[-1] if changes else None,
        tuple(touches), atol)


__all__ = ["OscillationVerdict", "find_sign_changes", "classify", "default_atol",
           "zero_threshold", "OSCILLATORY", "SIGN_CONSTANT"]
