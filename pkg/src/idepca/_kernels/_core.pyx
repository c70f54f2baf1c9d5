# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; see ``_fallback`` for the reference semantics."""

import numpy as np

from libc.math cimport exp, log, sin, cos, fabs, sqrt, floor, pow, isfinite

from ..errors import DomainError, NegativeCoefficientError, QuadratureError
from . import _opcodes as _op

BACKEND = "cython"

cdef enum:
    CONST = 0
    VAR = 1
    NEG = 2
    ADD = 3
    SUB = 4
    MUL = 5
    DIV = 6
    POW = 7
    EXP = 8
    LN = 9
    SIN = 10
    COS = 11
    ABS = 12
    SQRT = 13
    FLOOR = 14
    MIN = 15
    MAX = 16
    STACK = 256

cdef enum:
    OK = 0
    ERR_LN = 1
    ERR_SQRT = 2
    ERR_DIV = 3
    ERR_ZERO_POW = 4
    ERR_POW = 5
    ERR_NONFINITE = 6
    ERR_DEPTH = 7
    ERR_NEG_B = 20
    ERR_NEG_C = 21

cdef double EPS = 2.220446049250313e-16
cdef int MIN_DEPTH = 2
cdef int MAX_DEPTH = _op.SIMPSON_MAX_DEPTH
cdef double NEG_GUARD = -1e-12

OPCODES = {name: value for name, value in (
    ("CONST", CONST), ("VAR", VAR), ("NEG", NEG), ("ADD", ADD), ("SUB", SUB),
    ("MUL", MUL), ("DIV", DIV), ("POW", POW), ("EXP", EXP), ("LN", LN),
    ("SIN", SIN), ("COS", COS), ("ABS", ABS), ("SQRT", SQRT), ("FLOOR", FLOOR),
    ("MIN", MIN), ("MAX", MAX))}


ctypedef struct Program:
    const long long* code
    const double* consts
    Py_ssize_t n


cdef inline Program _program(const long long[::1] code, const double[::1] consts):
    cdef Program p
    p.code = &code[0]
    p.consts = &consts[0] if consts.shape[0] > 0 else NULL
    p.n = code.shape[0]
    return p


cdef int vm(Program p, double x, double* out) noexcept nogil:
    cdef double stack[STACK]
    cdef Py_ssize_t sp = 0
    cdef Py_ssize_t pc = 0
    cdef long long c
    cdef double a, b, r
    while pc < p.n:
        c = p.code[pc]
        pc += 1
        if c == CONST:
            stack[sp] = p.consts[p.code[pc]]
            pc += 1
            sp += 1
            continue
        if c == VAR:
            stack[sp] = x
            sp += 1
            continue
        if c == NEG or (c >= EXP and c <= FLOOR):
            a = stack[sp - 1]
            if c == NEG:
                r = -a
            elif c == EXP:
                r = exp(a)
                if not isfinite(r):
                    return ERR_NONFINITE
            elif c == LN:
                if a <= 0.0:
                    return ERR_LN
                r = log(a)
            elif c == SIN:
                r = sin(a)
            elif c == COS:
                r = cos(a)
            elif c == ABS:
                r = fabs(a)
            elif c == SQRT:
                if a < 0.0:
                    return ERR_SQRT
                r = sqrt(a)
            else:
                r = floor(a)
            stack[sp - 1] = r
            continue
        b = stack[sp - 1]
        a = stack[sp - 2]
        sp -= 1
        if c == ADD:
            r = a + b
        elif c == SUB:
            r = a - b
        elif c == MUL:
            r = a * b
        elif c == DIV:
            if b == 0.0:
                return ERR_DIV
            r = a / b
        elif c == POW:
            if a == 0.0 and b < 0.0:
                return ERR_ZERO_POW
            if a < 0.0 and b != floor(b):
                return ERR_POW
            r = pow(a, b)
        elif c == MIN:
            r = a if a <= b else b
        else:
            r = a if a >= b else b
        if not isfinite(r):
            return ERR_NONFINITE
        stack[sp - 1] = r
    out[0] = stack[sp - 1]
    return OK


cdef inline double _hermite(double t, double ta, double tb, double xa, double xb,
                            double fa, double fb) noexcept nogil:
    cdef double h = tb - ta
    cdef double s = (t - ta) / h
    cdef double s1 = 1.0 - s
    return ((1.0 + 2.0 * s) * s1 * s1 * xa + s * s1 * s1 * h * fa
            + s * s * (3.0 - 2.0 * s) * xb + s * s * (s - 1.0) * h * fb)


cdef void _raise(int status) except *:
    raise DomainError(_op.ERROR_MESSAGES[status])


def as_code(code):
    return np.ascontiguousarray(code, dtype=np.int64)


def as_consts(consts):
    arr = np.ascontiguousarray(consts, dtype=np.float64)
    if arr.shape[0] == 0:
        arr = np.zeros(1)
    return arr


def run_program(const long long[::1] code, const double[::1] consts, double x):
    cdef double out = 0.0
    cdef int status = vm(_program(code, consts), x, &out)
    if status != OK:
        _raise(status)
    return out


def hermite(double t, double ta, double tb, double xa, double xb, double fa, double fb):
    return _hermite(t, ta, tb, xa, xb, fa, fb)


def hermite_derivative(double t, double ta, double tb, double xa, double xb,
                       double fa, double fb):
    cdef double h = tb - ta
    cdef double s = (t - ta) / h
    return (6.0 * s * (s - 1.0) * (xa - xb) / h
            + (1.0 - s) * (1.0 - 3.0 * s) * fa + s * (3.0 * s - 2.0) * fb)


# adaptive Simpson over a compiled program ---------------------------------

cdef int _simp_prog(Program p, double a, double b, double fa, double fm, double fb,
                    double whole, double tol, int depth, double* out) noexcept nogil:
    cdef double m = 0.5 * (a + b)
    cdef double lm = 0.5 * (a + m)
    cdef double rm = 0.5 * (m + b)
    cdef double flm, frm, left, right, total, delta, noise, r1, r2
    cdef int status
    status = vm(p, lm, &flm)
    if status != OK:
        return status
    status = vm(p, rm, &frm)
    if status != OK:
        return status
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    total = left + right
    delta = total - whole
    noise = 4.0 * EPS * (fabs(left) + fabs(right))
    if depth >= MIN_DEPTH and fabs(delta) <= 15.0 * (tol if tol >= noise else noise):
        out[0] = total + delta / 15.0
        return OK
    if depth >= MAX_DEPTH:
        return ERR_DEPTH
    status = _simp_prog(p, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1, &r1)
    if status != OK:
        return status
    status = _simp_prog(p, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1, &r2)
    if status != OK:
        return status
    out[0] = r1 + r2
    return OK


def simpson_program(const long long[::1] code, const double[::1] consts,
                    double a, double b, double tol):
    cdef Program p = _program(code, consts)
    cdef double fa, fm, fb, out = 0.0
    cdef double m = 0.5 * (a + b)
    cdef int status
    if a == b:
        return 0.0
    with nogil:
        status = vm(p, a, &fa)
        if status == OK:
            status = vm(p, m, &fm)
        if status == OK:
            status = vm(p, b, &fb)
        if status == OK:
            status = _simp_prog(p, a, b, fa, fm, fb,
                                (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 0, &out)
    if status == ERR_DEPTH:
        raise QuadratureError(
            f"adaptive Simpson: {_op.ERROR_MESSAGES[ERR_DEPTH]} on [{a!r}, {b!r}]")
    if status != OK:
        _raise(status)
    return out


# adaptive Simpson over a Python callable ---------------------------------

cdef double _simp_py(object f, double a, double b, double fa, double fm, double fb,
                     double whole, double tol, int depth) except? -1.5e300:
    cdef double m = 0.5 * (a + b)
    cdef double lm = 0.5 * (a + m)
    cdef double rm = 0.5 * (m + b)
    cdef double flm = f(lm)
    cdef double frm = f(rm)
    cdef double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    cdef double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    cdef double total = left + right
    cdef double delta = total - whole
    cdef double noise = 4.0 * EPS * (fabs(left) + fabs(right))
    if depth >= MIN_DEPTH and fabs(delta) <= 15.0 * (tol if tol >= noise else noise):
        return total + delta / 15.0
    if depth >= MAX_DEPTH:
        raise QuadratureError(
            f"adaptive Simpson: {_op.ERROR_MESSAGES[ERR_DEPTH]} on [{a!r}, {b!r}]")
    return (_simp_py(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)
            + _simp_py(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1))


def adaptive_simpson(f, double a, double b, double tol):
    if a == b:
        return 0.0
    cdef double m = 0.5 * (a + b)
    cdef double fa = f(a)
    cdef double fm = f(m)
    cdef double fb = f(b)
    return _simp_py(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 0)


# method of steps ----------------------------------------------------------

cdef struct Stepper:
    const double* nodes
    double* xl
    double* xr
    double* dl
    double* dr
    Program a
    Program b
    Program c
    Program phi
    double tau
    double t0
    double fail_t
    double fail_v


cdef int _lookup(Stepper* st, double u, bint plus, Py_ssize_t k, double* out) noexcept nogil:
    cdef Py_ssize_t lo, hi, mid
    if u < st.t0:
        return vm(st.phi, u, out)
    if u >= st.nodes[k]:
        out[0] = st.xr[k] if plus else st.xl[k]
        return OK
    # largest j < k with nodes[j] <= u
    lo = 0
    hi = k
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if st.nodes[mid] <= u:
            lo = mid
        else:
            hi = mid
    if u == st.nodes[lo]:
        out[0] = st.xr[lo] if plus else st.xl[lo]
        return OK
    out[0] = _hermite(u, st.nodes[lo], st.nodes[lo + 1], st.xr[lo], st.xl[lo + 1],
                      st.dr[lo], st.dl[lo + 1])
    return OK


cdef int _rhs(Stepper* st, double s, double x, bint plus, Py_ssize_t k,
              double mb, double mc, double xp, double* out) noexcept nogil:
    cdef double av, bv, cv, xd
    cdef int status
    status = vm(st.a, s, &av)
    if status != OK:
        return status
    status = vm(st.b, s, &bv)
    if status != OK:
        return status
    status = vm(st.c, s, &cv)
    if status != OK:
        return status
    if bv < NEG_GUARD:
        st.fail_t = s
        st.fail_v = bv
        return ERR_NEG_B
    if cv < NEG_GUARD:
        st.fail_t = s
        st.fail_v = cv
        return ERR_NEG_C
    status = _lookup(st, s - st.tau, plus, k, &xd)
    if status != OK:
        return status
    out[0] = -(av * x + mb * bv * xd + mc * cv * xp)
    return OK


cdef int _run(Stepper* st, Py_ssize_t n_nodes, const unsigned char* has_jump,
              const double* jump_coef, const unsigned char* is_break,
              const double* mult_b, const double* mult_c) noexcept nogil:
    cdef Py_ssize_t k
    cdef double t, t1, h, mid, m, xp, mb, mc, x, k1, k2, k3, k4, xn, x0
    cdef int status
    status = vm(st.phi, st.t0, &x0)
    if status != OK:
        return status
    st.xl[0] = x0
    st.xr[0] = x0
    for k in range(n_nodes - 1):
        t = st.nodes[k]
        t1 = st.nodes[k + 1]
        h = t1 - t
        mid = t + 0.5 * h
        m = floor(mid) - 1.0
        if m < st.t0:
            status = vm(st.phi, m, &xp)
        else:
            status = _lookup(st, m, True, k, &xp)
        if status != OK:
            return status
        mb = mult_b[k]
        mc = mult_c[k]
        x = st.xr[k]
        if k == 0 or is_break[k] or has_jump[k]:
            status = _rhs(st, t, x, True, k, mb, mc, xp, &k1)
            if status != OK:
                return status
        else:
            k1 = st.dl[k]
        st.dr[k] = k1
        status = _rhs(st, mid, x + 0.5 * h * k1, True, k, mb, mc, xp, &k2)
        if status != OK:
            return status
        status = _rhs(st, mid, x + 0.5 * h * k2, True, k, mb, mc, xp, &k3)
        if status != OK:
            return status
        status = _rhs(st, t1, x + h * k3, False, k, mb, mc, xp, &k4)
        if status != OK:
            return status
        xn = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not isfinite(xn):
            st.fail_t = t1
            return ERR_NONFINITE
        st.xl[k + 1] = xn
        status = _rhs(st, t1, xn, False, k, mb, mc, xp, &st.dl[k + 1])
        if status != OK:
            return status
        st.xr[k + 1] = xn / (1.0 - jump_coef[k + 1]) if has_jump[k + 1] else xn
    st.dr[n_nodes - 1] = st.dl[n_nodes - 1]
    return OK


def integrate_steps(const double[::1] nodes, const unsigned char[::1] has_jump,
                    const double[::1] jump_coef, const unsigned char[::1] is_break,
                    const double[::1] mult_b, const double[::1] mult_c,
                    a_prog, b_prog, c_prog, phi_prog, double tau, double t0,
                    double[::1] xl, double[::1] xr, double[::1] dl, double[::1] dr):
    cdef const long long[::1] ac = a_prog[0]
    cdef const double[::1] ak = a_prog[1]
    cdef const long long[::1] bc = b_prog[0]
    cdef const double[::1] bk = b_prog[1]
    cdef const long long[::1] cc = c_prog[0]
    cdef const double[::1] ck = c_prog[1]
    cdef const long long[::1] pc = phi_prog[0]
    cdef const double[::1] pk = phi_prog[1]
    cdef Stepper st
    cdef int status
    cdef Py_ssize_t n_nodes = nodes.shape[0]
    st.nodes = &nodes[0]
    st.xl = &xl[0]
    st.xr = &xr[0]
    st.dl = &dl[0]
    st.dr = &dr[0]
    st.a = _program(ac, ak)
    st.b = _program(bc, bk)
    st.c = _program(cc, ck)
    st.phi = _program(pc, pk)
    st.tau = tau
    st.t0 = t0
    st.fail_t = 0.0
    st.fail_v = 0.0
    with nogil:
        status = _run(&st, n_nodes, &has_jump[0], &jump_coef[0], &is_break[0],
                      &mult_b[0], &mult_c[0])
    if status == ERR_NEG_B:
        raise NegativeCoefficientError("b", st.fail_t, st.fail_v)
    if status == ERR_NEG_C:
        raise NegativeCoefficientError("c", st.fail_t, st.fail_v)
    if status == ERR_NONFINITE and st.fail_t != 0.0:
        raise DomainError(f"solution overflowed at t={st.fail_t!r}")
    if status != OK:
        _raise(status)
