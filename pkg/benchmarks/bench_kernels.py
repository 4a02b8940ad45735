"""Compare the compiled and pure-Python evaluation kernels.

Times the NLP callbacks (objective, gradient, constraints, Jacobian,
Hessian) and full cold solves on the bundled Seaway case for each backend.

    python benchmarks/bench_kernels.py [--number 2000] [--solves 5] [--json out.json]
"""

from __future__ import annotations

import argparse
import json
import sys
import timeit

import numpy as np

from petroflow import kernels
from petroflow.formulation import FormulationKind, build_nlp
from petroflow.seaway import load_seaway
from petroflow.solver import SolverOptions, solve


def callbacks(problem):
    x = problem.x0.copy()
    lam = np.linspace(-1.0, 1.0, problem.m)
    return {
        "objective": lambda: problem.objective(x),
        "gradient": lambda: problem.gradient(x),
        "constraints": lambda: problem.constraints(x),
        "jacobian": lambda: problem.jacobian(x),
        "hessian": lambda: problem.hessian(x, lam, 1.0),
    }


def bench_backend(backend: str, number: int, solves: int) -> dict[str, float]:
    """Microseconds per call for each callback, milliseconds per solve."""
    net = load_seaway()
    problem = build_nlp(net, FormulationKind.f3(), backend=backend)
    out = {}
    for name, fn in callbacks(problem).items():
        best = min(timeit.repeat(fn, number=number, repeat=5))
        out[f"{name} [us]"] = best / number * 1e6
    times = []
    for _ in range(solves):
        res = solve(problem, SolverOptions())
        if not res.optimal:
            raise RuntimeError(f"{backend}: solve ended {res.status.value}")
        times.append(res.wall_time)
    out["solve [ms]"] = min(times) * 1e3
    out["iterations"] = float(res.iterations)
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--number", type=int, default=2000, help="calls per timing repeat")
    ap.add_argument("--solves", type=int, default=5, help="cold solves per backend")
    ap.add_argument("--json", help="also write the results here")
    args = ap.parse_args(argv)

    backends = ["python"] + (["compiled"] if kernels.HAVE_COMPILED else [])
    if not kernels.HAVE_COMPILED:
        print("compiled kernels not built; timing the python backend only", file=sys.stderr)
    results = {b: bench_backend(b, args.number, args.solves) for b in backends}

    rows = list(results["python"])
    print(f"{'metric':<18}" + "".join(f"{b:>12}" for b in backends) + ("     speedup" if len(backends) == 2 else ""))
    for key in rows:
        line = f"{key:<18}" + "".join(f"{results[b][key]:12.2f}" for b in backends)
        if len(backends) == 2 and key != "iterations":
            line += f"{results['python'][key] / results['compiled'][key]:12.1f}x"
        print(line)
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(results, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
