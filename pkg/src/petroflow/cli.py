"""Command-line front end.

Subcommands::

    petroflow validate NET.json
    petroflow solve NET.json --formulation f3 [--allocation ALLOC.json] [-o out.json]
    petroflow sweep NET.json --param producer:N9:price --from 280 --to 325 --steps 46 [-o out.csv]
    petroflow case-gen [-o DIR]
    petroflow check-derivs NET.json --formulation f2 [--at optimum]

Exit codes: 0 success, 2 invalid input, 3 solver did not reach a local
optimum, 4 file I/O failure.  ``$PETROFLOW_TOL`` overrides the default
solver tolerance; ``--tol`` overrides both.
"""

from __future__ import annotations

import argparse
import contextlib
import datetime as _dt
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .formulation import (FormulationError, FormulationKind, allocation_at, build_nlp, check_derivatives,
                          objective_terms)
from .network import JOULES_PER_KWH, SECONDS_PER_HOUR, Network, NetworkError, load_network, validate_network
from .pricing import PricingError, SweepSpec, nodal_prices, sweep, value_range
from .seaway import generate_seaway, load_f1_allocation
from .solver import LOG_HEADER, SolverOptions, kkt_residuals, multistart, solve

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NOT_OPTIMAL = 3
EXIT_IO = 4


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _load(path: str) -> Network:
    try:
        net = load_network(path)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror or exc}", EXIT_IO) from exc
    except NetworkError as exc:
        raise CliError(f"{path}: {exc}", EXIT_INVALID) from exc
    errors = [d for d in validate_network(net) if d.severity == "error"]
    if errors:
        raise CliError("\n".join(str(d) for d in errors), EXIT_INVALID)
    return net


def _kind(args) -> FormulationKind:
    if args.formulation == "f1":
        if not args.allocation:
            raise CliError("--formulation f1 needs --allocation FILE", EXIT_INVALID)
        try:
            alloc = load_f1_allocation(args.allocation)
        except OSError as exc:
            raise CliError(f"cannot read {args.allocation}: {exc.strerror or exc}", EXIT_IO) from exc
        except (ValueError, AttributeError, TypeError) as exc:
            raise CliError(f"{args.allocation}: malformed allocation ({exc})", EXIT_INVALID) from exc
        return FormulationKind.f1(alloc)
    return FormulationKind.parse(args.formulation)


def _options(args, log=None) -> SolverOptions:
    kw = {}
    if getattr(args, "tol", None) is not None:
        kw["tol"] = args.tol
    if getattr(args, "max_iter", None) is not None:
        kw["max_iter"] = args.max_iter
    if getattr(args, "deterministic", False):
        kw["deterministic"] = True
    try:
        return SolverOptions.from_env(log=log, **kw)
    except ValueError as exc:
        raise CliError(f"bad solver option: {exc}", EXIT_INVALID) from exc


@contextlib.contextmanager
def _log_stream(path):
    if not path:
        yield None
        return
    try:
        fh = open(path, "w", encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot open log {path}: {exc.strerror or exc}", EXIT_IO) from exc
    with fh:
        fh.write(LOG_HEADER + "\n")
        yield fh


def _emit(text: str, dest: str | None) -> None:
    if dest is None or dest == "-":
        sys.stdout.write(text)
        return
    try:
        p = Path(dest)
        if p.parent and not p.parent.exists():
            p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot write {dest}: {exc.strerror or exc}", EXIT_IO) from exc


def _f(v) -> float | None:
    v = float(v)
    return v if np.isfinite(v) else None


def solution_document(net: Network, problem, result, *, case: str | None = None,
                      deterministic: bool = False, runs: int = 1) -> dict:
    """Solution keyed by element id; flows in m3/h, heads in m, prices in $/m3."""
    lay = problem.layout
    x = np.asarray(result.x)
    terms = objective_terms(net, lay, x)
    sigma = {}
    if result.optimal:
        sigma = nodal_prices(net, lay, result, problem=problem).sigma
    alloc: dict[str, dict] = {}
    for nid, (sv, dv) in allocation_at(net, lay, x).items():
        node = net.node(nid)
        if node.producer is not None:
            alloc.setdefault(nid, {})["supply"] = sv * SECONDS_PER_HOUR
        if node.consumer is not None:
            alloc.setdefault(nid, {})["demand"] = dv * SECONDS_PER_HOUR

    bal = problem.row_groups["balance"]
    nodes = {}
    for k, node in enumerate(net.nodes):
        item = {"head": _f(x[lay.h_index(node.id)]), "balance_dual": _f(result.lam[bal][k])}
        if sigma:
            item["sigma"] = sigma[node.id]
        item.update(alloc.get(node.id, {}))
        nodes[node.id] = item
    pipes = {p.id: {"flow": float(x[lay.q_index(p.id)]) * SECONDS_PER_HOUR} for p in net.pipes}
    pumps = {}
    for k, p in enumerate(net.pumps):
        pumps[p.id] = {
            "flow": float(x[lay.q_index(p.id)]) * SECONDS_PER_HOUR,
            "speed": float(x[lay.w.start + k]),
            "efficiency": float(x[lay.eta.start + k]),
            "head_gain": float(x[lay.h_index(p.to_node)] - x[lay.h_index(p.from_node)]),
            "electricity_price": p.electricity_price * JOULES_PER_KWH,
        }
    audit = kkt_residuals(problem, result)
    meta = result.metadata
    doc = {
        "format": "petroflow-solution/1",
        "version": __version__,
        "case": case,
        "formulation": lay.kind.label,
        "status": result.status.value,
        "objective": {"J_E": terms.J_E, "J_O": terms.J_O, "J_P": terms.J_P,
                      "solver_objective": _f(result.objective)},
        "nodes": nodes,
        "pipes": pipes,
        "pumps": pumps,
        "kkt": {"stationarity": audit.stationarity, "feasibility": audit.feasibility,
                "complementarity": audit.complementarity,
                "solver_reported": list(result.kkt)},
        "prices_unique": bool(lay.kind.free_allocation),
        "solver": {
            "iterations": result.iterations,
            "restorations": meta.get("restorations", 0),
            "start": meta.get("start", "cold"),
            "multistart_runs": runs,
            "degenerate_complementarity": [list(t) for t in meta.get("degenerate_complementarity", [])],
            "weakly_active": [list(t) for t in meta.get("weakly_active", [])],
            "detail": meta.get("detail", ""),
        },
    }
    if not deterministic:
        doc["solver"]["wall_time"] = result.wall_time
    doc["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return doc


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_validate(args) -> int:
    try:
        net = load_network(args.input)
    except OSError as exc:
        raise CliError(f"cannot read {args.input}: {exc.strerror or exc}", EXIT_IO) from exc
    except NetworkError as exc:
        raise CliError(f"{args.input}: {exc}", EXIT_INVALID) from exc
    diags = validate_network(net)
    for d in diags:
        print(str(d), file=sys.stderr)
    if any(d.severity == "error" for d in diags):
        return EXIT_INVALID
    print(f"{args.input}: ok ({len(net.nodes)} nodes, {len(net.pipes)} pipes, {len(net.pumps)} pumps)")
    return EXIT_OK


def cmd_solve(args) -> int:
    net = _load(args.input)
    kind = _kind(args)
    with _log_stream(args.log) as log:
        opts = _options(args, log)
        try:
            problem = build_nlp(net, kind)
        except FormulationError as exc:
            raise CliError(str(exc), EXIT_INVALID) from exc
        runs = 1
        if args.multistart and args.multistart > 1:
            result, all_runs = multistart(problem, opts, k=args.multistart, seed=args.seed)
            runs = len(all_runs)
        else:
            result = solve(problem, opts)
    doc = solution_document(net, problem, result, case=str(args.input),
                            deterministic=args.deterministic, runs=runs)
    _emit(json.dumps(doc, indent=2) + "\n", args.output)
    if not result.optimal:
        print(f"solver finished with status {result.status.value}: {result.metadata.get('detail', '')}",
              file=sys.stderr)
        return EXIT_NOT_OPTIMAL
    return EXIT_OK


def cmd_sweep(args) -> int:
    net = _load(args.input)
    kind = _kind(args)
    if args.values:
        values = tuple(float(v) for v in args.values.split(","))
    else:
        if args.start is None or args.stop is None:
            raise CliError("sweep needs --values or both --from and --to", EXIT_INVALID)
        values = value_range(args.start, args.stop, args.steps)
    try:
        spec = SweepSpec(args.param, values, kind=kind, warm_start=not args.cold)
        with _log_stream(args.log) as log:
            table = sweep(net, spec, _options(args, log))
    except PricingError as exc:
        raise CliError(str(exc), EXIT_INVALID) from exc
    _emit(table.to_csv(), args.output)
    bad = [r for r in table.rows if not r.optimal]
    if bad:
        print(f"{len(bad)} of {len(table.rows)} rows not optimal", file=sys.stderr)
        return EXIT_NOT_OPTIMAL
    return EXIT_OK


def cmd_case_gen(args) -> int:
    manifest = generate_seaway()
    try:
        paths = manifest.write(args.output)
    except OSError as exc:
        raise CliError(f"cannot write case files: {exc.strerror or exc}", EXIT_IO) from exc
    for p in paths.values():
        print(p)
    return EXIT_OK


def cmd_check_derivs(args) -> int:
    net = _load(args.input)
    kind = _kind(args)
    problem = build_nlp(net, kind)
    x = problem.x0
    if args.at == "optimum":
        res = solve(problem, _options(args))
        if not res.optimal:
            print(f"solve for the derivative point ended {res.status.value}", file=sys.stderr)
            return EXIT_NOT_OPTIMAL
        x = res.x
    rep = check_derivatives(problem, x)
    print(f"gradient {rep.gradient:.3e}  jacobian {rep.jacobian:.3e}  hessian-vector {rep.hessian:.3e}")
    for group, err in rep.jacobian_by_group.items():
        print(f"  {group:<10s} {err:.3e}")
    ok = rep.ok(args.grad_tol, args.jac_tol, args.hess_tol)
    print("ok" if ok else "FAILED")
    return EXIT_OK if ok else 1


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--formulation", "-f", choices=("f1", "f2", "f3"), default="f3")
    p.add_argument("--allocation", help="fixed allocation JSON (m3/h) for f1")
    p.add_argument("--tol", type=float, help="solver tolerance (overrides $PETROFLOW_TOL)")
    p.add_argument("--max-iter", type=int, dest="max_iter")
    p.add_argument("--deterministic", action="store_true",
                   help="sequential, reproducible run; omits timings from the output")
    p.add_argument("--log", help="write the per-iteration log to this file")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="petroflow", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"petroflow {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="parse and check a network file")
    p.add_argument("input")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve", help="solve one formulation and write the solution JSON")
    p.add_argument("input")
    _solver_flags(p)
    p.add_argument("--output", "-o", help="solution JSON path (default: stdout)")
    p.add_argument("--multistart", type=int, default=0, metavar="K",
                   help="also solve from K-1 random interior points and keep the best")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="re-solve over a range of one parameter and write CSV")
    p.add_argument("input")
    _solver_flags(p)
    p.add_argument("--param", required=True,
                   help="producer:<node>:price|q_min|q_max, consumer:<node>:..., pump:<id>:electricity_price")
    p.add_argument("--from", dest="start", type=float)
    p.add_argument("--to", dest="stop", type=float)
    p.add_argument("--steps", type=int, default=11)
    p.add_argument("--values", help="comma-separated values instead of a range")
    p.add_argument("--cold", action="store_true", help="cold-start every row")
    p.add_argument("--output", "-o", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("case-gen", help="write the bundled Seaway case files")
    p.add_argument("--output", "-o", default=".", help="target directory")
    p.set_defaults(func=cmd_case_gen)

    p = sub.add_parser("check-derivs", help="finite-difference check of the NLP derivatives")
    p.add_argument("input")
    _solver_flags(p)
    p.add_argument("--at", choices=("x0", "optimum"), default="x0")
    p.add_argument("--grad-tol", type=float, default=1e-6)
    p.add_argument("--jac-tol", type=float, default=1e-6)
    p.add_argument("--hess-tol", type=float, default=1e-5)
    p.set_defaults(func=cmd_check_derivs)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "steps", 2) is not None and getattr(args, "steps", 2) < 1:
        print("petroflow: --steps must be at least 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        return args.func(args)
    except CliError as exc:
        print(f"petroflow: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
