"""Bytecode layout shared by both kernel backends.

A program is a flat int64 sequence. ``CONST`` is followed by an index into
the constant table; every other opcode stands alone. Evaluation is a plain
stack machine; the compiler in :mod:`idepca.exprlang` guarantees the stack
never exceeds :data:`MAX_STACK`.
"""

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

MAX_STACK = 256

BINARY = {"+": ADD, "-": SUB, "*": MUL, "/": DIV, "^": POW}
UNARY_CALLS = {"exp": EXP, "ln": LN, "sin": SIN, "cos": COS, "abs": ABS,
               "sqrt": SQRT, "floor": FLOOR}
BINARY_CALLS = {"min": MIN, "max": MAX}

# status codes returned by the C core
OK = 0
ERR_LN = 1
ERR_SQRT = 2
ERR_DIV = 3
ERR_ZERO_POW = 4
ERR_POW = 5
ERR_NONFINITE = 6
ERR_DEPTH = 7

ERROR_MESSAGES = {
    ERR_LN: "ln of a non-positive number",
    ERR_SQRT: "sqrt of a negative number",
    ERR_DIV: "division by zero",
    ERR_ZERO_POW: "0 raised to a negative power",
    ERR_POW: "negative base raised to a non-integer power",
    ERR_NONFINITE: "result is not finite (overflow)",
    ERR_DEPTH: "tolerance not reached within the bisection limit",
}

SIMPSON_MAX_DEPTH = 50
