"""Compare the compiled core with the pure-Python fallback.

Kernel timings call both backends in-process; the end-to-end timings run a
fresh interpreter per backend so import-time selection is exercised too.

    python3 benchmarks/bench_kernels.py [--repeat N] [--quick]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from idepca import _kernels
from idepca.exprlang import Program, parse_expr

EXPR = "exp(-t/3) * sin(2*t) + min(t, 1/(1 + t^2))"

E2E = """
import json, time
from idepca import _kernels
from idepca.model import make_problem
from idepca.solver import integrate
from idepca.criteria import check_all
p, i = make_problem(a="1", b="pi", c="exp(t)", tau=2.5, t0=0.5, times="integers",
                    coeff="-2^i")
best = {{}}
for label, fn in (("integrate", lambda: integrate(p, i, {horizon}, h_max={h})),
                  ("check_all", lambda: check_all(p))):
    times = []
    for _ in range({repeat}):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    best[label] = min(times)
print(json.dumps({{"backend": _kernels.BACKEND, **best}}))
"""


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def kernel_cases(mod, n_eval):
    prog = Program(parse_expr(EXPR))
    code, consts = mod.as_code(prog.code), mod.as_consts(prog.consts)
    xs = np.linspace(0.1, 10.0, n_eval).tolist()

    def vm():
        for x in xs:
            mod.run_program(code, consts, x)

    def simpson():
        for k in range(50):
            mod.simpson_program(code, consts, 0.0, 1.0 + 0.1 * k, 1e-10)

    def hermite():
        for x in xs:
            mod.hermite(x, 0.0, 10.0, 1.0, 2.0, 0.5, -0.5)

    return {"vm_eval x%d" % n_eval: vm, "simpson x50": simpson,
            "hermite x%d" % n_eval: hermite}


def integrate_case(mod, n_steps):
    from idepca.model import make_problem
    from idepca.solver import build_mesh, step_grid

    p, i = make_problem(a="0.1*sin(t)", b="pi", c="exp(-t/4)", tau=0.5, t0=0.25,
                        times="integers", coeff="-1", phi="cos(t)")
    horizon = 0.25 + n_steps * 1e-2
    mesh = build_mesh(p, horizon)
    nodes = np.asarray(step_grid(p.t0, horizon, mesh.times, 1e-2))
    n = len(nodes)
    has_jump = np.zeros(n, dtype=np.uint8)
    jump_coef = np.zeros(n)
    is_break = np.zeros(n, dtype=np.uint8)
    for k, t in enumerate(nodes):
        if t == round(t) and t > p.t0:
            has_jump[k] = 1
            jump_coef[k] = -1.0
        if t in mesh:
            is_break[k] = 1
    ones = np.ones(n)
    progs = [(mod.as_code(f.code), mod.as_consts(f.consts))
             for f in (p.a_fn, p.b_fn, p.c_fn, i.fn)]

    def run():
        out = [np.zeros(n) for _ in range(4)]
        mod.integrate_steps(nodes, has_jump, jump_coef, is_break, ones, ones, *progs,
                            p.tau, p.t0, *out)

    return {"integrate_steps x%d" % (n - 1): run}


def end_to_end(pure, repeat, horizon, h):
    env = dict(os.environ)
    env.pop("IDEPCA_PURE_PYTHON", None)
    if pure:
        env["IDEPCA_PURE_PYTHON"] = "1"
    code = E2E.format(repeat=repeat, horizon=horizon, h=h)
    res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                         text=True, check=True)
    return json.loads(res.stdout)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="smaller workloads")
    args = ap.parse_args(argv)

    backends = _kernels.available_backends()
    if "cython" not in backends:
        print("compiled core not available; only the fallback can be timed")
    n_eval = 2000 if args.quick else 20000
    n_steps = 300 if args.quick else 3000

    rows = []
    names = sorted(backends)
    labels = list(kernel_cases(backends["python"], n_eval)) + \
        list(integrate_case(backends["python"], n_steps))
    timings = {}
    for name in names:
        cases = {**kernel_cases(backends[name], n_eval), **integrate_case(backends[name], n_steps)}
        timings[name] = {label: best_of(cases[label], args.repeat) for label in labels}
    for label in labels:
        py = timings["python"][label]
        cy = timings.get("cython", {}).get(label)
        rows.append((label, py, cy))

    horizon, h = (6.0, 1e-2) if args.quick else (20.0, 5e-3)
    e2e = {"python": end_to_end(True, args.repeat, horizon, h)}
    if "cython" in backends:
        e2e["cython"] = end_to_end(False, args.repeat, horizon, h)
    for label in ("integrate", "check_all"):
        rows.append((f"end-to-end {label} (Example 2)", e2e["python"][label],
                     e2e.get("cython", {}).get(label)))

    print(f"{'case':<36}{'python [s]':>12}{'cython [s]':>12}{'speedup':>10}")
    for label, py, cy in rows:
        if cy is None:
            print(f"{label:<36}{py:>12.4f}{'-':>12}{'-':>10}")
        else:
            print(f"{label:<36}{py:>12.4f}{cy:>12.4f}{py / cy:>9.1f}x")


if __name__ == "__main__":
    main()
