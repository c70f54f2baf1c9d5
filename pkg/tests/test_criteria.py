import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from conftest import pure_delay
from idepca import criteria
from idepca.criteria import (CERTIFIED, INCONCLUSIVE, NOT_SATISFIED, SATISFIED, Scan,
                             check_all, check_condition, cumulative_a, integral_b_between,
                             integral_c_between, window_integral_b, window_integral_c)
from idepca.errors import CriterionError
from idepca.exprlang import compile_expr
from idepca.model import make_problem

INV_E = math.exp(-1)


def _A(problem, lo=-5.0, hi=80.0):
    return cumulative_a(problem.a_fn, lo, hi)


def test_cumulative_a_examples():
    A = cumulative_a(compile_expr("1"), -2.0, 10.0)
    for t in (-2.0, -1.3, 0.0, 4.56, 10.0):
        assert abs(A(t) - (t + 2.0)) <= 1e-12
    assert cumulative_a(compile_expr("0"), 0.0, 5.0)(3.3) == 0.0
    assert cumulative_a(compile_expr("t"), 0.0, 2.0)(2.0) == pytest.approx(2.0, abs=1e-12)


def test_cumulative_a_additivity():
    a = compile_expr("1 + sin(3*t) * exp(-t/4)")
    A = cumulative_a(a, 0.0, 12.0)
    rng = random.Random(3)
    for _ in range(50):
        t1, t2 = sorted(rng.uniform(0, 12) for _ in range(2))
        ref = quad(a, t1, t2, epsabs=1e-13, epsrel=1e-13)[0]
        assert abs(A(t2) - A(t1) - ref) <= 2 * criteria.A_TOL + 1e-13


def test_window_b_examples(ex1):
    p, _ = pure_delay(0.8, 0.6)
    assert window_integral_b(p, _A(p), 5.0, 0.6) == pytest.approx(0.8 * 0.6, abs=1e-12)
    p, _ = ex1
    A = _A(p)
    for n in range(3, 9):
        assert window_integral_b(p, A, n + 0.5, 0.5) == pytest.approx(math.pi, abs=1e-10)
        assert window_integral_b(p, A, float(n), 0.5) == pytest.approx(math.pi / 2, abs=1e-10)


def test_window_c_examples():
    p, _ = make_problem(c="0.7", tau=1, t0=1)
    assert window_integral_c(p, _A(p), 4, 1.0) == pytest.approx(0.7, abs=1e-12)
    p, _ = make_problem(a="1", c="1", tau=1, t0=1)
    assert window_integral_c(p, _A(p), 4, 1.0) == pytest.approx(math.e ** 2 - math.e, abs=1e-9)
    p, _ = make_problem(b="1", tau=1, t0=1)
    assert window_integral_c(p, _A(p), 4, 1.0) == 0.0


def test_window_preconditions():
    p, _ = pure_delay(1.0, 0.5)
    with pytest.raises(CriterionError):
        window_integral_b(p, _A(p), 1.2, 0.5)
    with pytest.raises(CriterionError):
        window_integral_c(p, _A(p), 1, 1.0)


def test_closed_form_exponential():
    p, _ = make_problem(a="0.3", b="exp(0.1*t)", tau=0.8, t0=1)
    t, l = 7.0, 0.8
    exact = math.exp(0.3 * 0.8) * (math.exp(0.1 * t) - math.exp(0.1 * (t - l))) / 0.1
    assert window_integral_b(p, _A(p), t, l) == pytest.approx(exact, abs=1e-9)
    q, _ = make_problem(a="0.5", c="exp(-t)", tau=1, t0=1)
    n = 5
    exact = math.exp(-0.5 * (n - 1)) * (math.exp(-0.5 * n) - math.exp(-0.5 * (n + 1))) / 0.5
    assert window_integral_c(q, _A(q), n, 1.0) == pytest.approx(exact, abs=1e-9)


def _oracle_b(problem, lo, hi, times, coeffs):
    """scipy quad over pieces with a brute-force product."""
    tau = problem.tau
    cuts = sorted({x for t in times for x in (t, t + tau) if lo < x < hi})
    pts = [lo] + cuts + [hi]
    total = 0.0
    for p, q in zip(pts, pts[1:]):
        mid = 0.5 * (p + q)
        f = 1.0
        for t, b in zip(times, coeffs):
            if mid - tau < t <= mid and t > problem.t0:
                f *= 1 - b
        g = lambda s: problem.b_fn(s) * math.exp(quad(problem.a_fn, s - tau, s,
                                                      epsabs=1e-14)[0])
        total += f * quad(g, p, q, epsabs=1e-13, epsrel=1e-13)[0]
    return total


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(1.0, 9.0), min_size=1, max_size=5, unique=True),
       st.floats(0.3, 1.5), st.floats(2.0, 8.0), st.floats(0.2, 2.0))
def test_split_matches_quad_oracle(times, tau, lo, width):
    times = sorted(times)
    coeffs = [-0.5 - k for k in range(len(times))]
    src = "+".join(f"({b!r})*max(0, 1 - abs(i - {k + 1}))" for k, b in enumerate(coeffs))
    p, _ = make_problem(a="0.2*cos(t)", b="1 + t/10", tau=tau, t0=0.5, times=times, coeff=src)
    A = _A(p, -3.0, 20.0)
    got = integral_b_between(p, A, lo, lo + width)
    assert got == pytest.approx(_oracle_b(p, lo, lo + width, times, coeffs), abs=1e-9)
    # splitting at an impulse time must not change the result
    mid = times[0] if lo < times[0] < lo + width else lo + width / 2
    parts = integral_b_between(p, A, lo, mid) + integral_b_between(p, A, mid, lo + width)
    assert abs(parts - got) <= 1e-10


def test_split_c_at_impulse():
    p, _ = make_problem(a="0.1", c="2 + sin(t)", tau=1, t0=0.5, times=[3.3, 3.7], coeff="-i")
    A = _A(p)
    whole = integral_c_between(p, A, 3, 3.0, 4.0)
    parts = (integral_c_between(p, A, 3, 3.0, 3.3) + integral_c_between(p, A, 3, 3.3, 3.7)
             + integral_c_between(p, A, 3, 3.7, 4.0))
    assert abs(whole - parts) <= 1e-10
    g = lambda s: (2 + math.sin(s)) * math.exp(0.1 * (s - 2.0))
    ref = (quad(g, 3.0, 3.3)[0] + 2 * quad(g, 3.3, 3.7)[0] + 2 * 3 * quad(g, 3.7, 4.0)[0])
    assert whole == pytest.approx(ref, abs=1e-10)


def test_check_condition_classical():
    p, _ = pure_delay(1.0, 0.5)
    rep = check_condition(p, "T3-b")
    assert rep.verdict == SATISFIED
    assert max(abs(v - 0.5) for v in rep.values) <= 1e-9
    p, _ = pure_delay(1.0, 0.3)
    rep = check_condition(p, "T3-b")
    assert rep.verdict == NOT_SATISFIED
    assert max(abs(v - 0.3) for v in rep.values) <= 1e-9


def test_check_condition_examples(ex1, ex2):
    p, _ = ex1
    assert check_condition(p, "T2-b").tail == pytest.approx(math.pi, abs=1e-3)
    assert check_condition(p, "T3-b").tail == pytest.approx(math.pi / 2, abs=1e-3)
    p, _ = ex2
    rep = check_condition(p, "T2-b", Scan(p.t0 + 2.5, p.t0 + 10.0))
    assert rep.verdict == SATISFIED
    assert min(rep.values) >= math.pi * math.exp(2.5) - 1e-6


def test_check_condition_errors(ex1):
    p, _ = ex1
    with pytest.raises(CriterionError):
        check_condition(p, "C1")  # c is not zero
    with pytest.raises(CriterionError):
        check_condition(p, "nope")
    with pytest.raises(CriterionError):
        check_condition(p, "T2-b", Scan(p.t0, p.t0 + 5))


def test_check_all_examples(ex1, ex2):
    s = check_all(ex1[0])
    assert s.verdict == CERTIFIED and {"T2-b", "T3-b"} <= set(s.certified_by)
    s = check_all(ex2[0])
    assert s.verdict == CERTIFIED and "T2-b" in s.certified_by
    s = check_all(pure_delay(0.2, 1.0)[0])
    assert s.verdict == INCONCLUSIVE
    assert [r.condition for r in s.reports] == ["T2-b", "T2-c", "T3-b", "T3-c", "C1", "C3"]


def test_single_coefficient_forms_need_their_hypothesis():
    both = make_problem(b="1", c="1", tau=0.5, t0=1)[0]
    assert criteria.applicable_conditions(both) == ["T2-b", "T2-c", "T3-b", "T3-c"]
    conly = make_problem(c="0.3", tau=0.5, t0=1)[0]
    assert criteria.applicable_conditions(conly)[-2:] == ["C2", "C4"]


@pytest.mark.parametrize("alpha", [1.5, 3.0, 10.0])
def test_scaling_b_scales_values(alpha):
    base = make_problem(a="0.1", b="0.3 + 0.1*sin(t)", tau=0.7, t0=1, times="integers",
                        coeff="-0.5")[0]
    scaled = make_problem(a="0.1", b=f"{alpha} * (0.3 + 0.1*sin(t))", tau=0.7, t0=1,
                          times="integers", coeff="-0.5")[0]
    scan = Scan(3.0, 12.0, 0.25)
    for cid in ("T2-b", "T3-b"):
        r0 = check_condition(base, cid, scan)
        r1 = check_condition(scaled, cid, scan)
        for v0, v1 in zip(r0.values, r1.values):
            assert v1 == pytest.approx(alpha * v0, rel=1e-9)
        if r0.verdict == SATISFIED:
            assert r1.verdict == SATISFIED


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 2.0), st.floats(0.1, 1.5), st.floats(0.0, 1.0))
def test_disjunction(b, tau, c):
    p = make_problem(b=repr(b), c=repr(c), tau=tau, t0=1.0)[0]
    s = check_all(p, Scan(1.0 + max(tau, 2.0), 1.0 + max(tau, 2.0) + 6, 0.5))
    assert (s.verdict == CERTIFIED) == any(r.verdict == SATISFIED for r in s.reports)
    assert s.certified_by == tuple(r.condition for r in s.reports if r.verdict == SATISFIED)


@pytest.mark.parametrize("tau", [0.3, 0.7, 1.0])
def test_tau_window_matches_l_window(tau):
    p = make_problem(a="0.2*sin(t)", b="1 + cos(t)^2", tau=tau, t0=1,
                     times=[2.5, 4.1, 6.0], coeff="-i/2")[0]
    scan = Scan(1 + max(tau, 2), 15.0, 0.1)
    r10 = check_condition(p, "C1", scan)
    r10y = check_condition(p, "T2-b", scan)
    assert max(abs(x - y) for x, y in zip(r10.values, r10y.values)) <= 1e-10


def test_report_tail_uses_trailing_half(ex1):
    rep = check_condition(ex1[0], "T2-b", Scan(2.25, 4.25, 0.25))
    tail = rep.values[len(rep.values) // 2:]
    assert rep.tail == max(tail)
    assert len(rep.times) == len(rep.values) == 9
