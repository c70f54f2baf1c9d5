"""Pure-Python kernels.

This module is the reference implementation of every hot loop; the
compiled ``_core`` extension mirrors it operation for operation, so both
backends produce the same floating-point results.
"""

import math
from bisect import bisect_right

from ..errors import DomainError, NegativeCoefficientError, QuadratureError
from . import _opcodes as op

BACKEND = "python"

_EPS = 2.220446049250313e-16
_MIN_DEPTH = 2
_NEG_GUARD = -1e-12
_isfinite = math.isfinite


def as_code(code):
    return tuple(int(c) for c in code)


def as_consts(consts):
    return tuple(float(c) for c in consts)


def _fail(status):
    raise DomainError(op.ERROR_MESSAGES[status])


def apply_unary(opcode, x):
    if opcode == op.NEG:
        return -x
    if opcode == op.EXP:
        try:
            return math.exp(x)
        except OverflowError:
            _fail(op.ERR_NONFINITE)
    if opcode == op.LN:
        if x <= 0.0:
            _fail(op.ERR_LN)
        return math.log(x)
    if opcode == op.SIN:
        return math.sin(x)
    if opcode == op.COS:
        return math.cos(x)
    if opcode == op.ABS:
        return abs(x)
    if opcode == op.SQRT:
        if x < 0.0:
            _fail(op.ERR_SQRT)
        return math.sqrt(x)
    if opcode == op.FLOOR:
        return float(math.floor(x))
    raise ValueError(f"bad unary opcode {opcode}")


def apply_binary(opcode, a, b):
    if opcode == op.ADD:
        r = a + b
    elif opcode == op.SUB:
        r = a - b
    elif opcode == op.MUL:
        r = a * b
    elif opcode == op.DIV:
        if b == 0.0:
            _fail(op.ERR_DIV)
        r = a / b
    elif opcode == op.POW:
        if a == 0.0 and b < 0.0:
            _fail(op.ERR_ZERO_POW)
        if a < 0.0 and b != math.floor(b):
            _fail(op.ERR_POW)
        try:
            r = math.pow(a, b)
        except OverflowError:
            _fail(op.ERR_NONFINITE)
    elif opcode == op.MIN:
        r = a if a <= b else b
    elif opcode == op.MAX:
        r = a if a >= b else b
    else:
        raise ValueError(f"bad binary opcode {opcode}")
    if not _isfinite(r):
        _fail(op.ERR_NONFINITE)
    return r


def run_program(code, consts, x):
    stack = []
    push = stack.append
    pop = stack.pop
    pc = 0
    n = len(code)
    while pc < n:
        c = code[pc]
        pc += 1
        if c == op.CONST:
            push(consts[code[pc]])
            pc += 1
        elif c == op.VAR:
            push(x)
        elif c == op.NEG or op.EXP <= c <= op.FLOOR:
            push(apply_unary(c, pop()))
        else:
            b = pop()
            push(apply_binary(c, pop(), b))
    return stack[-1]


def hermite(t, ta, tb, xa, xb, fa, fb):
    h = tb - ta
    s = (t - ta) / h
    s1 = 1.0 - s
    return ((1.0 + 2.0 * s) * s1 * s1 * xa + s * s1 * s1 * h * fa
            + s * s * (3.0 - 2.0 * s) * xb + s * s * (s - 1.0) * h * fb)


def hermite_derivative(t, ta, tb, xa, xb, fa, fb):
    h = tb - ta
    s = (t - ta) / h
    return (6.0 * s * (s - 1.0) * (xa - xb) / h
            + (1.0 - s) * (1.0 - 3.0 * s) * fa + s * (3.0 * s - 2.0) * fb)


def _simpson_rec(f, a, b, fa, fm, fb, whole, tol, depth):
    m = 0.5 * (a + b)
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm = f(lm)
    frm = f(rm)
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    total = left + right
    delta = total - whole
    noise = 4.0 * _EPS * (abs(left) + abs(right))
    if depth >= _MIN_DEPTH and abs(delta) <= 15.0 * max(tol, noise):
        return total + delta / 15.0
    if depth >= op.SIMPSON_MAX_DEPTH:
        raise QuadratureError(
            f"adaptive Simpson: {op.ERROR_MESSAGES[op.ERR_DEPTH]} on [{a!r}, {b!r}]")
    return (_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)
            + _simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1))


def adaptive_simpson(f, a, b, tol):
    """Integrate a Python callable over [a, b] to absolute tolerance ``tol``."""
    if a == b:
        return 0.0
    m = 0.5 * (a + b)
    fa = f(a)
    fm = f(m)
    fb = f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return _simpson_rec(f, a, b, fa, fm, fb, whole, tol, 0)


def simpson_program(code, consts, a, b, tol):
    """Adaptive Simpson of a compiled expression over [a, b]."""
    return adaptive_simpson(lambda x: run_program(code, consts, x), a, b, tol)


def integrate_steps(nodes, has_jump, jump_coef, is_break, mult_b, mult_c,
                    a_prog, b_prog, c_prog, phi_prog, tau, t0,
                    xl, xr, dl, dr):
    """Classical RK4 over a precomputed node grid (method of steps).

    Fills ``xl``/``xr`` (left/right values at nodes) and ``dl``/``dr``
    (slopes ending/starting a segment). Step k spans nodes[k]..nodes[k+1];
    its length never exceeds ``tau``, so every delayed argument reads
    finished history or the initial function.
    """
    nodes = list(nodes)
    n_nodes = len(nodes)
    a_code, a_consts = a_prog
    b_code, b_consts = b_prog
    c_code, c_consts = c_prog
    p_code, p_consts = phi_prog
    lxl = [0.0] * n_nodes
    lxr = [0.0] * n_nodes
    ldl = [0.0] * n_nodes
    ldr = [0.0] * n_nodes

    def lookup(u, plus, k):
        # value of the solution at u <= nodes[k]
        if u < t0:
            return run_program(p_code, p_consts, u)
        if u >= nodes[k]:
            return lxr[k] if plus else lxl[k]
        j = bisect_right(nodes, u, 0, k) - 1
        if u == nodes[j]:
            return lxr[j] if plus else lxl[j]
        return hermite(u, nodes[j], nodes[j + 1], lxr[j], lxl[j + 1], ldr[j], ldl[j + 1])

    def rhs(s, x, plus, k, mb, mc, xp):
        av = run_program(a_code, a_consts, s)
        bv = run_program(b_code, b_consts, s)
        cv = run_program(c_code, c_consts, s)
        if bv < _NEG_GUARD:
            raise NegativeCoefficientError("b", s, bv)
        if cv < _NEG_GUARD:
            raise NegativeCoefficientError("c", s, cv)
        xd = lookup(s - tau, plus, k)
        return -(av * x + mb * bv * xd + mc * cv * xp)

    x0 = run_program(p_code, p_consts, t0)
    lxl[0] = x0
    lxr[0] = x0
    for k in range(n_nodes - 1):
        t = nodes[k]
        t1 = nodes[k + 1]
        h = t1 - t
        mid = t + 0.5 * h
        m = math.floor(mid) - 1.0
        xp = run_program(p_code, p_consts, m) if m < t0 else lookup(m, True, k)
        mb = mult_b[k]
        mc = mult_c[k]
        x = lxr[k]
        if k == 0 or is_break[k] or has_jump[k]:
            k1 = rhs(t, x, True, k, mb, mc, xp)
        else:
            k1 = ldl[k]
        ldr[k] = k1
        k2 = rhs(mid, x + 0.5 * h * k1, True, k, mb, mc, xp)
        k3 = rhs(mid, x + 0.5 * h * k2, True, k, mb, mc, xp)
        k4 = rhs(t1, x + h * k3, False, k, mb, mc, xp)
        xn = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not _isfinite(xn):
            raise DomainError(f"solution overflowed at t={t1!r}")
        lxl[k + 1] = xn
        ldl[k + 1] = rhs(t1, xn, False, k, mb, mc, xp)
        lxr[k + 1] = xn / (1.0 - jump_coef[k + 1]) if has_jump[k + 1] else xn
    ldr[n_nodes - 1] = ldl[n_nodes - 1]
    for k in range(n_nodes):
        xl[k] = lxl[k]
        xr[k] = lxr[k]
        dl[k] = ldl[k]
        dr[k] = ldr[k]
