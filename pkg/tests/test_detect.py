import math

import numpy as np
import pytest

from conftest import example1, example2, pure_delay
from idepca.detect import (OSCILLATORY, SIGN_CONSTANT, classify, default_atol,
                           find_sign_changes, zero_threshold)
from idepca.errors import WindowTooShortError
from idepca.exprlang import parse_expr
from idepca.model import InitialData, make_problem
from idepca.solver import Trajectory, integrate


def synthetic(f, df, t0, t1, n=2001, jumps=None):
    ts = np.linspace(t0, t1, n).tolist()
    xs = [f(t) for t in ts]
    ds = [df(t) for t in ts]
    xr = list(xs)
    for t, (left, right, b) in (jumps or {}).items():
        k = ts.index(t)
        xs[k], xr[k] = left, right
    return Trajectory(ts, xs, xr, ds, ds, jumps or {}, t0, t1, tau=1.0)


def test_positive_trajectory_has_no_changes():
    tr = synthetic(lambda t: 2 + math.sin(t), math.cos, 0.0, 20.0)
    assert find_sign_changes(tr) == []
    assert classify(tr).classification == SIGN_CONSTANT


def test_crossings_are_refined():
    tr = synthetic(math.cos, lambda t: -math.sin(t), 0.0, 10.0)
    changes = find_sign_changes(tr)
    expected = [math.pi / 2 + k * math.pi for k in range(3)]
    assert changes == pytest.approx(expected, abs=1e-6)  # dense output is cubic
    for t in changes:
        assert abs(tr.evaluate(t)) <= 10 * zero_threshold(tr, t)


def test_final_quarter_rule():
    cos = (math.cos, lambda t: -math.sin(t))
    assert classify(synthetic(*cos, 0.0, 10.0)).classification == OSCILLATORY
    # last change at 3 pi / 2 ~ 4.71 is before the final quarter [4.875, 6.5]
    v = classify(synthetic(*cos, 0.0, 6.5))
    assert v.classification == SIGN_CONSTANT and v.count == 2


def test_impulse_flip_recorded_at_jump():
    f = lambda t: 1.0 + 0 * t
    d = lambda t: 0.0
    ts = np.linspace(0, 8, 801).tolist()
    t_jump = ts[700]
    tr = synthetic(f, d, 0.0, 8.0, 801)
    # after the jump the trajectory is -1
    tr.xr = [v if t < t_jump else -1.0 for t, v in zip(ts, tr.xr)]
    tr.xl = [v if t <= t_jump else -1.0 for t, v in zip(ts, tr.xl)]
    tr.jumps = {t_jump: (1.0, -1.0, 2.0)}
    assert find_sign_changes(tr) == [t_jump]


def test_sign_preserving_jump_not_a_change(ex1):
    p, i = make_problem(b="0.1", tau=1, t0=1, times="integers", coeff="-1")
    tr = integrate(p, i, 10.0)
    assert tr.jumps and find_sign_changes(tr) == []


def test_example1_oscillates():
    p, i = example1()
    tr = integrate(p, i, 20.0)
    assert len(find_sign_changes(tr)) >= 5
    v = classify(tr)
    assert v.classification == OSCILLATORY
    assert v.count == len(v.sign_changes) and v.last_change == v.sign_changes[-1]


def test_pure_delay_sign_constant():
    p, i = pure_delay(0.2, 1.0)
    assert classify(integrate(p, i, 31.0)).classification == SIGN_CONSTANT


def test_zero_solution_all_touches():
    p, _ = pure_delay(0.2, 1.0)
    tr = integrate(p, InitialData(parse_expr("0")), 11.0)
    v = classify(tr)
    assert v.classification == SIGN_CONSTANT
    assert len(v.zero_touches) == len(tr.nodes)


def test_window_too_short():
    p, i = pure_delay(1.0, 0.5)
    with pytest.raises(WindowTooShortError):
        classify(integrate(p, i, 4.5))


def test_fixed_atol_option():
    p, i = example1()
    tr = integrate(p, i, 20.0)
    v = classify(tr, atol=default_atol(tr))
    assert v.atol == default_atol(tr) and v.classification == OSCILLATORY


@pytest.mark.parametrize("make,horizon", [
    (example1, None), (example2, None), (lambda: pure_delay(1.0, 0.5), None),
    (lambda: pure_delay(0.2, 1.0), None)])
def test_invariant_under_step_halving(make, horizon):
    p, i = make()
    h = p.t0 + 30
    a = classify(integrate(p, i, h, h_max=1e-2)).classification
    b = classify(integrate(p, i, h, h_max=5e-3)).classification
    assert a == b
