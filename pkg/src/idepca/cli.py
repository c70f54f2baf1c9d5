"""Command-line front end.

Problem files are plain ``key = value`` lines::

    # Example: x' + pi x(t - 1/2) + x([t - 1]) = 0 with x(n+) = x(n-) / 2
    a = 0
    b = pi
    c = 1
    tau = 0.5
    t0 = 0.25
    horizon = 20
    phi = 1
    impulse.times = integers
    impulse.coeff = -1

a, b, c and phi are expressions in t, impulse.coeff is an expression in i,
tau, t0 and horizon are constant expressions. impulse.times is "integers",
"arithmetic:<first>,<step>" or "list:<t1>,<t2>,...".
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import criteria, detect, solver, transform
from .errors import (CriterionError, ExprError, IdepcaError, InvalidProblemError,
                     WindowTooShortError)
from .exprlang import evaluate, parse_expr
from .model import ARITHMETIC, INTEGERS, LIST, ImpulseSchedule, InitialData, Problem, validate

EXIT_OK = 0
EXIT_IO = 2
EXIT_PARSE = 3
EXIT_INVALID = 4
EXIT_NUMERIC = 5
EXIT_INCONCLUSIVE = 10
EXIT_VERIFY_FAILED = 11
EXIT_SIGN_CONSTANT = 12
EXIT_USAGE = 64
EXIT_BAD_NUMBER = 65

EXIT_CODES = {
    EXIT_OK: "success (certified, passed, or oscillation detected)",
    EXIT_IO: "problem file or output path unreadable/unwritable",
    EXIT_PARSE: "problem file syntax error, bad expression, or missing key",
    EXIT_INVALID: "problem or request rejected by validation",
    EXIT_NUMERIC: "numerical failure during integration or quadrature",
    EXIT_INCONCLUSIVE: "check: no condition satisfied at horizon",
    EXIT_VERIFY_FAILED: "verify-theorem1: deviation above tolerance",
    EXIT_SIGN_CONSTANT: "detect: sign constant at horizon",
    EXIT_USAGE: "unknown flag or malformed command line",
    EXIT_BAD_NUMBER: "numeric flag value could not be parsed",
}

EXPR_KEYS = {"a": "t", "b": "t", "c": "t", "phi": "t", "impulse.coeff": "i"}
CONST_KEYS = ("tau", "t0", "horizon")
KEYS = ("a", "b", "c", "tau", "t0", "horizon", "phi", "impulse.times", "impulse.coeff")
REQUIRED = ("a", "tau", "t0", "horizon")
DEFAULTS = {"b": "0", "c": "0", "phi": "1"}

# validation issue code -> key it is about
_ISSUE_KEYS = {"TAU": "tau", "T0": "t0", "HORIZON": "horizon", "PHI": "phi",
               "IMPULSE_EVAL": "impulse.coeff", "IMPULSE_ONE": "impulse.coeff",
               "IMPULSE_SIGN_FLIP": "impulse.coeff", "A_EVAL": "a", "B_EVAL": "b", "B_NEGATIVE": "b",
               "C_EVAL": "c", "C_NEGATIVE": "c"}


class CliError(IdepcaError):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


class NumericFlagError(Exception):
    """Raised by numeric flag converters; kept outside argparse's own handling."""


def fmt(x: float) -> str:
    return format(float(x), ".17g")


# problem files

@dataclass
class ProblemText:
    """Raw key/value entries with the line each came from (None if synthetic)."""

    source: str
    entries: dict = field(default_factory=dict)

    def where(self, key):
        line = self.entries.get(key, (None, None))[1]
        return f"{self.source}:{line}" if line else self.source

    def value(self, key):
        if key in self.entries:
            return self.entries[key][0]
        return DEFAULTS.get(key)

    def with_values(self, values: dict) -> "ProblemText":
        entries = dict(self.entries)
        for key, text in values.items():
            entries[key] = (text, None)
        return ProblemText(self.source, entries)


@dataclass
class LoadedProblem:
    problem: Problem
    initial: InitialData
    horizon: float
    warnings: tuple
    text: ProblemText


def parse_problem_text(text: str, source: str = "<string>") -> ProblemText:
    out = ProblemText(source)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(EXIT_PARSE, f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise CliError(EXIT_PARSE, f"{source}:{lineno}: unknown key {key!r}")
        if key in out.entries:
            raise CliError(EXIT_PARSE, f"{source}:{lineno}: duplicate key {key!r} "
                                       f"(first set on line {out.entries[key][1]})")
        if not value:
            raise CliError(EXIT_PARSE, f"{source}:{lineno}: empty value for {key!r}")
        out.entries[key] = (value, lineno)
    return out


def read_problem_file(path: str) -> ProblemText:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except (OSError, UnicodeDecodeError) as exc:
        raise CliError(EXIT_IO, f"cannot read {path}: {exc}") from None
    return parse_problem_text(text, path)


def _split_top(text):
    """Split on commas outside parentheses."""
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
            continue
        depth += (ch == "(") - (ch == ")")
        cur.append(ch)
    parts.append("".join(cur))
    return [p.strip() for p in parts]


def _constant(pt, key, text):
    try:
        return evaluate(parse_expr(text, None), 0.0)
    except ExprError as exc:
        raise CliError(EXIT_PARSE, f"{pt.where(key)}: {key}: {exc}") from None
    except ArithmeticError as exc:
        raise CliError(EXIT_PARSE, f"{pt.where(key)}: {key}: {exc}") from None


def _expression(pt, key, text):
    try:
        return parse_expr(text, EXPR_KEYS[key])
    except ExprError as exc:
        raise CliError(EXIT_PARSE, f"{pt.where(key)}: {key}: {exc}") from None


def _schedule(pt):
    times = pt.value("impulse.times")
    coeff_text = pt.value("impulse.coeff")
    if times is None and coeff_text is None:
        return ImpulseSchedule.empty()
    if times is None or coeff_text is None:
        missing = "impulse.times" if times is None else "impulse.coeff"
        raise CliError(EXIT_PARSE, f"{pt.source}: missing required key {missing!r} "
                                   "(impulse.times and impulse.coeff go together)")
    coeff = _expression(pt, "impulse.coeff", coeff_text)
    kind, _, rest = times.partition(":")
    kind = kind.strip()
    try:
        if kind == INTEGERS and not rest:
            return ImpulseSchedule(INTEGERS, coeff=coeff)
        if kind == ARITHMETIC:
            args = [_constant(pt, "impulse.times", s) for s in _split_top(rest)]
            if len(args) != 2:
                raise CliError(EXIT_PARSE, f"{pt.where('impulse.times')}: arithmetic needs "
                                           "'<first>,<step>'")
            return ImpulseSchedule(ARITHMETIC, first=args[0], step=args[1], coeff=coeff)
        if kind == LIST:
            items = [s for s in _split_top(rest) if s] if rest.strip() else []
            values = tuple(_constant(pt, "impulse.times", s) for s in items)
            return ImpulseSchedule(LIST, values, coeff=coeff)
    except ValueError as exc:
        raise CliError(EXIT_INVALID, f"{pt.where('impulse.times')}: {exc}") from None
    raise CliError(EXIT_PARSE, f"{pt.where('impulse.times')}: impulse.times must be "
                               "'integers', 'arithmetic:<first>,<step>' or 'list:<t1>,...'")


def build_problem(pt: ProblemText) -> LoadedProblem:
    """Parse and validate; raises CliError with exit code 3 or 4."""
    for key in REQUIRED:
        if pt.value(key) is None:
            raise CliError(EXIT_PARSE, f"{pt.source}: missing required key {key!r}")
    exprs = {k: _expression(pt, k, pt.value(k)) for k in ("a", "b", "c", "phi")}
    consts = {k: _constant(pt, k, pt.value(k)) for k in CONST_KEYS}
    schedule = _schedule(pt)
    problem = Problem(exprs["a"], exprs["b"], exprs["c"], consts["tau"], consts["t0"], schedule)
    initial = InitialData(exprs["phi"])
    report = validate(problem, consts["horizon"], initial)
    if not report.ok:
        lines = [f"{pt.where(_ISSUE_KEYS.get(i.code))}: {i.code}: {i.message}"
                 for i in report.errors]
        raise CliError(EXIT_INVALID, "\n".join(lines))
    warnings = tuple(f"{pt.where(_ISSUE_KEYS.get(i.code))}: warning: {i.code}: {i.message}"
                     for i in report.warnings)
    return LoadedProblem(problem, initial, consts["horizon"], warnings, pt)


def load_problem(path: str) -> LoadedProblem:
    return build_problem(read_problem_file(path))


# CSV

def trajectory_csv(traj: solver.Trajectory) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "x", "side"])
    for t, x, side in traj.samples():
        w.writerow([fmt(t), fmt(x), side])
    return buf.getvalue()


def read_trajectory_csv(text: str) -> list[tuple[float, float, str]]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["t", "x", "side"]:
        raise ValueError("not a trajectory CSV (header must be t,x,side)")
    return [(float(t), float(x), side) for t, x, side in rows[1:]]


def criteria_csv(summary: criteria.Summary) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["condition", "window_t", "value"])
    for rep in summary.reports:
        for t, v in zip(rep.times, rep.values):
            w.writerow([rep.condition, fmt(t), fmt(v)])
    return buf.getvalue()


def _emit(text, out):
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    try:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {out}: {exc}") from None


# commands

def _scan_from_args(problem, args):
    default = criteria.default_scan(problem)
    start = default.start if args.scan_start is None else args.scan_start
    end = start + 50.0 if args.scan_end is None else args.scan_end
    stride = default.stride if args.stride is None else args.stride
    return criteria.Scan(start, end, stride)


def _report_lines(summary):
    lines = []
    for r in summary.reports:
        lines.append(f"{r.condition} {r.label} window={fmt(r.window_len)} "
                     f"tail-{r.mode}={r.tail:.10g} threshold={r.threshold:.10g} {r.verdict}")
    return lines


def cmd_simulate(lp, args):
    traj = solver.integrate(lp.problem, lp.initial, lp.horizon, h_max=args.h_max)
    _emit(trajectory_csv(traj), args.out)
    return EXIT_OK


def cmd_check(lp, args):
    scan = _scan_from_args(lp.problem, args)
    summary = criteria.check_all(lp.problem, scan, margin=args.margin)
    _emit(criteria_csv(summary), args.out)
    for line in _report_lines(summary):
        print(line, file=sys.stderr)
    certified = summary.verdict == criteria.CERTIFIED
    print("CERTIFIED" if certified else "INCONCLUSIVE")
    return EXIT_OK if certified else EXIT_INCONCLUSIVE


def cmd_transform(lp, args):
    p = lp.problem
    if args.grid < 2:
        raise CliError(EXIT_INVALID, "--grid must be at least 2")
    tp = transform.transformed_problem(p)
    product = transform.JumpProduct(p.schedule, p.t0, lp.horizon)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "product", "B", "C"])
    for t in np.linspace(p.t0, lp.horizon, args.grid).tolist():
        w.writerow([fmt(t), fmt(product(t)), fmt(tp.B(t)), fmt(tp.C(t))])
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_verify(lp, args):
    rep = transform.verify_jump_identity(lp.problem, lp.initial, lp.horizon, tol=args.tol,
                                    h_max=args.h_max)
    print(f"max_deviation={rep.max_deviation:.6e} scale={rep.scale:.6e} tol={rep.tol:.3e} "
          f"{'PASS' if rep.passed else 'FAIL'}")
    return EXIT_OK if rep.passed else EXIT_VERIFY_FAILED


def cmd_detect(lp, args):
    traj = solver.integrate(lp.problem, lp.initial, lp.horizon, h_max=args.h_max)
    verdict = detect.classify(traj, atol=args.atol)
    lines = ["sign_change_t"] + [fmt(t) for t in verdict.sign_changes]
    _emit("\n".join(lines) + "\n", args.out)
    print(f"{verdict.classification} changes={verdict.count}")
    return EXIT_OK if verdict.classification == detect.OSCILLATORY else EXIT_SIGN_CONSTANT


EXAMPLES = {
    "1": ("""\
# x'(t) + pi x(t - 1/2) + c(t) x([t - 1]) = 0, x(n+) = x(n-) / 2
# c may be any nonnegative continuous function; c = 1 here.
a = 0
b = pi
c = 1
tau = 0.5
t0 = 0.25
horizon = 20
phi = 1
impulse.times = integers
impulse.coeff = -1
""", ("T2-b", "T3-b"), True),
    "2": ("""\
# x'(t) + x(t) + pi x(t - 5/2) + e^t x([t - 1]) = 0, x(t_n+) = x(t_n-) / (1 + 2^n)
# Any increasing sequence of impulse times works; t_n = n here.
# |x| grows roughly like prod (1 + 2^n), so the horizon is capped at 6. Sign
# changes come about 2 time units apart, too sparse for the detector's
# final-quarter rule on [0.5, 6]; the detect verdict is informational here.
a = 1
b = pi
c = exp(t)
tau = 2.5
t0 = 0.5
horizon = 6
phi = 1
impulse.times = integers
impulse.coeff = -2^i
""", ("T2-b",), False),
}


def run_example(number: str, h_max: float = 1e-2):
    """Load, check, simulate and detect a built-in example; returns (lines, exit code)."""
    text, claimed, detect_expected = EXAMPLES[number]
    lp = build_problem(parse_problem_text(text, f"<example {number}>"))
    summary = criteria.check_all(lp.problem)
    traj = solver.integrate(lp.problem, lp.initial, lp.horizon, h_max=h_max)
    verdict = detect.classify(traj)
    shown = [c for c in claimed if c in summary.certified_by]
    missing = [c for c in claimed if c not in summary.certified_by]
    crit = "CERTIFIED" if summary.verdict == criteria.CERTIFIED else "INCONCLUSIVE"
    lines = [f"criteria: {crit} ({', '.join(shown)}); detect: {verdict.classification}",
             f"satisfied: {', '.join(summary.certified_by) or 'none'}",
             f"sign changes: {verdict.count} on [{fmt(lp.problem.t0)}, "
             f"{fmt(lp.horizon)}], max |x| = {traj.max_abs():.6e}"]
    lines += _report_lines(summary)
    ok = verdict.classification == detect.OSCILLATORY or not detect_expected
    if not detect_expected:
        lines.append("note: detect verdict not part of conformance for this example "
                     "(horizon capped)")
    if missing:
        lines.append(f"conformance: FAIL (expected satisfied: {', '.join(missing)})")
        code = EXIT_INCONCLUSIVE
    elif not ok:
        lines.append("conformance: FAIL (no oscillation detected)")
        code = EXIT_SIGN_CONSTANT
    else:
        lines.append("conformance: PASS")
        code = EXIT_OK
    return lines, code


def cmd_example(args):
    if args.print_file:
        sys.stdout.write(EXAMPLES[args.number][0])
        return EXIT_OK
    lines, code = run_example(args.number, args.h_max)
    print("\n".join(lines))
    return code


# sweep

def parse_vary(spec: str):
    key, sep, rng = spec.partition("=")
    key = key.strip()
    if not sep:
        raise CliError(EXIT_USAGE, f"--vary expects key=lo:hi:n, got {spec!r}")
    if key not in KEYS or key == "impulse.times":
        raise CliError(EXIT_USAGE, f"--vary: key {key!r} cannot be varied")
    parts = rng.split(":")
    if len(parts) != 3:
        raise CliError(EXIT_USAGE, f"--vary expects key=lo:hi:n, got {spec!r}")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise NumericFlagError(f"--vary: bad number in {spec!r}") from None
    if not (math.isfinite(lo) and math.isfinite(hi)) or n < 1:
        raise NumericFlagError(f"--vary: need finite bounds and n >= 1 in {spec!r}")
    return key, np.linspace(lo, hi, n).tolist()


def sweep_point(pt: ProblemText, keys: tuple, values: tuple, h_max: float):
    """One grid point -> (values, summary verdict, detect verdict). Never raises."""
    try:
        lp = build_problem(pt.with_values({k: fmt(v) for k, v in zip(keys, values)}))
    except CliError as exc:
        tag = "Invalid" if exc.code == EXIT_INVALID else "ParseError"
        return values, tag, tag
    try:
        summary = criteria.check_all(lp.problem).verdict
    except (InvalidProblemError, CriterionError):
        summary = "Invalid"
    except (IdepcaError, ArithmeticError):
        summary = "NumericalFailure"
    try:
        traj = solver.integrate(lp.problem, lp.initial, lp.horizon, h_max=h_max)
        verdict = detect.classify(traj).classification
    except (InvalidProblemError, WindowTooShortError):
        verdict = "Invalid"
    except (IdepcaError, ArithmeticError):
        verdict = "NumericalFailure"
    return values, summary, verdict


def sweep_rows(pt: ProblemText, varies: list, h_max: float = 1e-2, workers: int | None = None):
    keys = tuple(k for k, _ in varies)
    if len(set(keys)) != len(keys):
        raise CliError(EXIT_USAGE, "--vary: each key may be varied once")
    grid = list(itertools.product(*(vals for _, vals in varies)))
    if workers == 1:
        results = [sweep_point(pt, keys, g, h_max) for g in grid]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(sweep_point, pt, keys, g, h_max) for g in grid]
            results = [f.result() for f in futures]
    results.sort(key=lambda r: r[0])
    return keys, results


def cmd_sweep(args):
    pt = read_problem_file(args.file)
    varies = [parse_vary(v) for v in args.vary]
    keys, results = sweep_rows(pt, varies, args.h_max, args.workers)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(keys) + ["summary", "detect"])
    for values, summary, verdict in results:
        w.writerow([fmt(v) for v in values] + [summary, verdict])
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


# argument parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _real(text):
    try:
        v = float(text)
    except ValueError:
        raise NumericFlagError(f"not a number: {text!r}") from None
    if not math.isfinite(v):
        raise NumericFlagError(f"not a finite number: {text!r}")
    return v


def _positive(text):
    v = _real(text)
    if not v > 0:
        raise NumericFlagError(f"must be positive: {text!r}")
    return v


def _count(text):
    try:
        return int(text)
    except ValueError:
        raise NumericFlagError(f"not an integer: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    epilog = "exit codes:\n" + "\n".join(f"  {k:>3}  {v}" for k, v in EXIT_CODES.items())
    parser = _Parser(prog="idepca", description=__doc__.split("\n")[0], epilog=epilog,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def with_file(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("file")
        return p

    p = with_file("simulate", "integrate and write t,x,side CSV")
    p.add_argument("--h-max", type=_positive, default=1e-2)
    p.add_argument("--out")
    p.set_defaults(run=cmd_simulate)

    p = with_file("check", "evaluate the oscillation criteria")
    p.add_argument("--scan-start", type=_real)
    p.add_argument("--scan-end", type=_real)
    p.add_argument("--stride", type=_positive)
    p.add_argument("--margin", type=_real, default=criteria.DEFAULT_MARGIN)
    p.add_argument("--out")
    p.set_defaults(run=cmd_check)

    p = with_file("transform", "tabulate the jump product and transformed coefficients")
    p.add_argument("--grid", type=_count, default=201)
    p.add_argument("--out")
    p.set_defaults(run=cmd_transform)

    p = with_file("verify-theorem1", "compare P x with the impulse-free solution y")
    p.add_argument("--tol", type=_positive, default=1e-6)
    p.add_argument("--h-max", type=_positive, default=1e-2)
    p.set_defaults(run=cmd_verify)

    p = with_file("detect", "count sign changes of a simulated solution")
    p.add_argument("--h-max", type=_positive, default=1e-2)
    p.add_argument("--atol", type=_positive)
    p.add_argument("--out")
    p.set_defaults(run=cmd_detect)

    p = sub.add_parser("example", help="run a built-in worked example end to end")
    p.add_argument("number", choices=sorted(EXAMPLES))
    p.add_argument("--h-max", type=_positive, default=1e-2)
    p.add_argument("--print-file", action="store_true", help="print the problem file and exit")
    p.set_defaults(run=None)

    p = with_file("sweep", "evaluate a parameter grid concurrently")
    p.add_argument("--vary", action="append", required=True, metavar="KEY=LO:HI:N")
    p.add_argument("--h-max", type=_positive, default=1e-2)
    p.add_argument("--workers", type=_count)
    p.add_argument("--out")
    p.set_defaults(run=None)
    return parser


def _dispatch(args):
    if args.command == "example":
        return cmd_example(args)
    if args.command == "sweep":
        return cmd_sweep(args)
    lp = load_problem(args.file)
    for w in lp.warnings:
        print(w, file=sys.stderr)
    return args.run(lp, args)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except NumericFlagError as exc:
        print(f"idepca: error: {exc}", file=sys.stderr)
        return EXIT_BAD_NUMBER
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return _dispatch(args)
    except NumericFlagError as exc:
        print(f"idepca: error: {exc}", file=sys.stderr)
        return EXIT_BAD_NUMBER
    except CliError as exc:
        print(f"idepca: error: {exc}", file=sys.stderr)
        return exc.code
    except (InvalidProblemError, CriterionError, WindowTooShortError) as exc:
        print(f"idepca: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (IdepcaError, ArithmeticError) as exc:
        print(f"idepca: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
