"""``dvqls`` command line: decompose, solve, estimate, bench, scaling-report.

Exit codes: 0 success (or converged), 1 solve finished without reaching the
cost tolerance, 2 usage error, 3 runtime error.

Settings resolve as flags > environment > ``--config`` JSON file > defaults.
With ``--out`` the machine-readable report goes to that file and figures are
rendered next to it (``<stem>_*.png``) unless ``--no-plots`` is given.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import estimator
from .cost import METHODS, CostFunction, ProblemInstance, fidelity, solution_state
from .executor import WORKERS_ENV, Executor, default_workers, run_scaling_benchmark
from .optimizer import COST_TOLERANCE, OptimizerConfig, initial_point, minimize
from .pauli import DEFAULT_EPSILON, MAX_DENSE_QUBITS, decompose, load_matrix, prune, reconstruct
from .problems import PROBLEMS, LinearSystem, build_problem, classical_solve
from .simulator import ENTANGLERS

log = logging.getLogger("dvqls")

EXIT_OK, EXIT_NOT_CONVERGED, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3

DEFAULTS = {
    "qubits": None,
    "layers": None,  # d = n
    "epsilon": DEFAULT_EPSILON,
    "workers": None,  # hardware parallelism
    "max_evals": None,  # per problem, see BUDGETS
    "tol": 1e-10,
    "seed": 0,
    "method": "direct",
    "entangler": "cnot_ring",
    "a": 2.0,
    "b": -1.0,
    "c": -1.0,
    "format": "json",
}


BUDGETS = {"tridiag": 5000, "heleshaw-pressure": 20000, "heleshaw-velocity": 20000}
DEFAULT_BUDGET = 5000


class UsageError(Exception):
    pass


# -- settings -------------------------------------------------------------------

def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise UsageError(f"{path}: config must be a JSON object")
    unknown = set(doc) - set(DEFAULTS)
    if unknown:
        raise UsageError(f"{path}: unknown config keys {sorted(unknown)}")
    return {k.replace("-", "_"): v for k, v in doc.items()}


def resolve(args: argparse.Namespace) -> dict:
    """Merge flags, environment, config file and defaults, then validate."""
    cfg = dict(DEFAULTS)
    cfg.update(_load_config(getattr(args, "config", None)))
    env_workers = os.environ.get(WORKERS_ENV)
    if env_workers:
        try:
            cfg["workers"] = int(env_workers)
        except ValueError:
            raise UsageError(f"{WORKERS_ENV}={env_workers!r} is not an integer") from None
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    for key in ("qubits", "layers", "workers", "max_evals"):
        if cfg[key] is not None and (not isinstance(cfg[key], int) or cfg[key] < 1):
            raise UsageError(f"{key.replace('_', '-')} must be a positive integer, got {cfg[key]!r}")
    if cfg["tol"] is None or cfg["tol"] <= 0:
        raise UsageError("tol must be positive")
    if not 0 <= cfg["epsilon"] < 1:
        raise UsageError("epsilon must lie in [0, 1)")
    if cfg["method"] not in METHODS:
        raise UsageError(f"method must be one of {METHODS}")
    if cfg["entangler"] not in ENTANGLERS:
        raise UsageError(f"entangler must be one of {ENTANGLERS}")
    if cfg["format"] not in ("json", "csv"):
        raise UsageError("format must be json or csv")
    return cfg


def _read_vector(spec: str, dim: int) -> np.ndarray:
    if spec == "uniform":
        return np.full(dim, dim ** -0.5)
    if spec == "e0":
        return np.eye(dim)[0]
    try:
        with open(spec) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read rhs {spec}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{spec}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if isinstance(doc, dict):
        re_, im = doc.get("real"), doc.get("imag")
        if re_ is None:
            raise UsageError(f"{spec}: missing field 'real'")
        vec = np.asarray(re_, dtype=float) + 1j * np.asarray(im if im is not None else np.zeros(len(re_)), dtype=float)
    else:
        vec = np.asarray(doc, dtype=float)
    if vec.ndim != 1 or vec.size != dim:
        raise UsageError(f"{spec}: rhs must be a flat list of {dim} numbers")
    return vec


def load_system(args, cfg) -> LinearSystem:
    if getattr(args, "matrix", None):
        try:
            A = load_matrix(args.matrix)
        except OSError as exc:
            raise UsageError(f"cannot read matrix {args.matrix}: {exc.strerror}") from exc
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        dim = A.shape[0]
        rhs = _read_vector(args.rhs or "uniform", dim)
        return LinearSystem(A, rhs, Path(args.matrix).stem)
    problem = getattr(args, "problem", None)
    if problem is None:
        raise UsageError("give a problem name or --matrix")
    if problem not in PROBLEMS:
        raise UsageError(f"unknown problem {problem!r}; choose from {', '.join(PROBLEMS)}")
    if problem == "tridiag" and cfg["qubits"] is None:
        raise UsageError("tridiag needs --qubits")
    system = build_problem(problem, cfg["qubits"], cfg["a"], cfg["b"], cfg["c"])
    if getattr(args, "rhs", None):
        system = LinearSystem(system.A, _read_vector(args.rhs, system.A.shape[0]), system.label)
    return system


# -- output ---------------------------------------------------------------------

def _emit(doc: dict, rows: list[dict] | None, cfg: dict, out: str | None) -> None:
    """Write ``doc`` as JSON, or ``rows`` as CSV when format is csv."""
    if cfg["format"] == "csv" and rows is not None:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]) if rows else [], lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        text = buf.getvalue()
    else:
        text = json.dumps(doc, indent=2, default=_json_default) + "\n"
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"{type(obj).__name__} is not JSON serialisable")


def _sidecar(out: str, suffix: str) -> Path:
    p = Path(out)
    return p.with_name(f"{p.stem}_{suffix}")


# -- subcommands ------------------------------------------------------------------

def cmd_decompose(args, cfg) -> int:
    system = load_system(args, cfg)
    full = decompose(system.A)
    pruned = prune(full, cfg["epsilon"])
    err = float(np.max(np.abs(reconstruct(pruned) - system.A)))
    doc = {
        "label": system.label,
        "num_qubits": full.num_qubits,
        "epsilon": cfg["epsilon"],
        "L_full": len(full),
        "L_pruned": len(pruned),
        "reconstruction_error": err,
        "terms": pruned.to_json(),
    }
    rows = pruned.to_json()
    _emit(doc, rows, cfg, args.out)
    print(f"L_full={len(full)} L_pruned={len(pruned)} max_error={err:.3e}", file=sys.stderr)
    return EXIT_OK


def cmd_solve(args, cfg) -> int:
    system = load_system(args, cfg)
    instance = ProblemInstance.from_system(system.A, system.rhs, cfg["epsilon"], cfg["layers"],
                                           cfg["entangler"], system.label)
    workers = cfg["workers"] or default_workers()
    if cfg["max_evals"] is None:
        cfg["max_evals"] = BUDGETS.get(getattr(args, "problem", None), DEFAULT_BUDGET)
    opt = OptimizerConfig(max_evals=cfg["max_evals"], cost_tolerance=cfg["tol"], seed=cfg["seed"])
    theta0 = initial_point(instance.ansatz.parameter_count, cfg["seed"])
    t0 = time.perf_counter()
    with Executor(workers) as ex:
        fn = CostFunction(instance, ex, cfg["method"])
        theta, trace = minimize(fn, theta0, opt)
        last_stats = fn.last.stats.to_json() if fn.last and fn.last.stats else None
    wall = time.perf_counter() - t0

    report = {
        "config": {k: cfg[k] for k in DEFAULTS if k != "format"} | {
            "problem": system.label, "workers": workers, "layers": instance.ansatz.layers},
        "decomposition": {"L_full": instance.decomposition.full_count, "L_pruned": instance.L,
                          "epsilon": cfg["epsilon"]},
        "circuits_per_iteration": estimator.circuits_per_iteration(instance.n, instance.L),
        "evaluations": len(trace.evaluations),
        "iterations": trace.iterations,
        "total_circuits": fn.circuits,
        "final_cost": trace.best_cost,
        "termination_reason": trace.termination_reason,
        "converged": trace.termination_reason == COST_TOLERANCE,
        "theta": trace.best_theta.tolist(),
        "timing": {"wall_time": wall, "cost_time": fn.wall_time},
        "executor": last_stats,
        "trace": None,
    }
    if instance.n <= MAX_DENSE_QUBITS:
        x_classical = classical_solve(system)
        x = solution_state(instance, theta)
        report["fidelity"] = fidelity(x, x_classical)
    else:
        x_classical = x = None

    rows = [{"eval_index": e.eval_index, "cost": e.cost} for e in trace.evaluations]
    if args.out:
        trace_path = _sidecar(args.out, "trace.csv")
        trace_path.parent.mkdir(parents=True, exist_ok=True)
        with open(trace_path, "w") as fh:
            trace.to_csv(fh)
        report["trace"] = str(trace_path)
        if not args.no_plots:
            from . import plotting
            figures = [str(plotting.learning_curve(trace.costs, _sidecar(args.out, "cost.png"), system.label))]
            if x is not None:
                figures.append(str(plotting.amplitudes(x, x_classical, _sidecar(args.out, "amplitudes.png"),
                                                       system.label)))
            report["figures"] = figures
    _emit(report, rows, cfg, args.out)
    msg = f"{system.label}: cost={trace.best_cost:.3e} evals={len(trace.evaluations)} {trace.termination_reason}"
    if "fidelity" in report:
        msg += f" fidelity={report['fidelity']:.6f}"
    print(msg, file=sys.stderr)
    return EXIT_OK if report["converged"] else EXIT_NOT_CONVERGED


def cmd_estimate(args, cfg) -> int:
    n = cfg["qubits"]
    if n is None:
        raise UsageError("estimate needs --qubits")
    upto = args.upto or n
    if upto < n:
        raise UsageError("--upto must be >= --qubits")
    if args.terms is not None and args.terms < 1:
        raise UsageError("terms must be a positive integer")
    if args.terms is not None and args.worst_case:
        raise UsageError("--terms and --worst-case are exclusive")
    if args.terms is None and not args.worst_case:
        raise UsageError("give --terms L or --worst-case")
    rows = []
    for q in range(n, upto + 1):
        d = cfg["layers"] or q
        rows.append(estimator.worst_case(q, d) if args.worst_case else estimator.estimate(q, d, args.terms))
    if cfg["format"] == "json" and args.out is None and not args.json:
        print(estimator.format_table(rows))
        for r in rows:
            one, two = r.gate_columns()
            print(f"n={r.n}: {one} / {two} / {r.circuits_per_iter:,}")
        return EXIT_OK
    doc = {"rows": [r.to_json() for r in rows]}
    _emit(doc, [r.to_json() for r in rows], cfg, args.out)
    return EXIT_OK


def cmd_bench(args, cfg) -> int:
    try:
        counts = [int(w) for w in args.worker_list.split(",") if w.strip()]
    except ValueError:
        raise UsageError(f"--worker-list must be comma-separated integers, got {args.worker_list!r}") from None
    if not counts or min(counts) < 1:
        raise UsageError("--worker-list needs at least one positive integer")
    system = load_system(args, cfg)
    instance = ProblemInstance.from_system(system.A, system.rhs, cfg["epsilon"], cfg["layers"],
                                           cfg["entangler"], system.label)
    theta = initial_point(instance.ansatz.parameter_count, cfg["seed"])
    method = args.bench_method
    bench = run_scaling_benchmark(instance, theta, counts, method=method, pool=args.pool,
                                  repeats=args.repeats)
    rows = [{"workers": r.workers, "wall_time": r.wall_time, "speedup": r.speedup,
             "efficiency": r.efficiency, "cost": r.cost, "circuits": r.circuits} for r in bench]
    doc = {"problem": system.label, "L": instance.L, "n": instance.n, "method": method,
           "cpu_count": os.cpu_count(), "rows": rows,
           "cost_spread": max(r.cost for r in bench) - min(r.cost for r in bench)}
    if args.out and not args.no_plots:
        from . import plotting
        doc["figures"] = [str(plotting.scaling([r.workers for r in bench], [r.wall_time for r in bench],
                                               _sidecar(args.out, "scaling.png"), system.label))]
    _emit(doc, rows, cfg, args.out)
    for r in bench:
        print(f"W={r.workers:>3} t={r.wall_time:.4f}s speedup={r.speedup:.2f} eff={r.efficiency:.1%}",
              file=sys.stderr)
    return EXIT_OK


def cmd_scaling_report(args, cfg) -> int:
    try:
        with open(args.input) as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {args.input}: {exc.strerror}") from exc
    records = [r for r in csv.reader(io.StringIO(text)) if r and "".join(r).strip()]
    width = len(records[0]) if records else 0
    try:
        if width == 4:
            entries = []
            for i, (label, circ, units, t) in enumerate(records):
                try:
                    entries.append((label.strip(), int(circ), int(units), float(t)))
                except ValueError:
                    if i:
                        raise ValueError(f"line {i + 1}: expected label,circuits,units,t") from None
            rows = estimator.weak_scaling_rows(entries, args.baseline)
            out_rows = [r.to_json() for r in rows]
            base = rows[args.baseline].t_norm
            for r in out_rows:
                r["efficiency"] = estimator.efficiency(base, r["t_norm"])
            doc = {"mode": "weak", "baseline": args.baseline, "rows": out_rows}
            if args.out and not args.no_plots:
                from . import plotting
                doc["figures"] = [str(plotting.weak_scaling([r.label for r in rows], [r.t_norm for r in rows],
                                                            base, _sidecar(args.out, "weak.png")))]
        else:
            measured = estimator.read_scaling_csv(io.StringIO(text))
            report = estimator.scaling_report(measured, args.baseline)
            out_rows = [vars(r) for r in report]
            doc = {"mode": "measured", "baseline": args.baseline, "rows": out_rows}
            if args.out and not args.no_plots:
                from . import plotting
                doc["figures"] = [str(plotting.scaling([r.units for r in report], [r.t for r in report],
                                                       _sidecar(args.out, "scaling.png")))]
    except (ValueError, IndexError) as exc:
        raise UsageError(f"{args.input}: {exc}") from exc
    _emit(doc, out_rows, cfg, args.out)
    return EXIT_OK


# -- parser -------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, problem: bool = True):
    if problem:
        p.add_argument("problem", nargs="?", help=f"one of {', '.join(PROBLEMS)}")
        p.add_argument("--matrix", help="JSON matrix file {n, real, imag}")
        p.add_argument("--rhs", help="JSON vector file, or 'uniform' / 'e0'")
        p.add_argument("--a", type=float, help="tridiag main diagonal")
        p.add_argument("--b", type=float, help="tridiag super-diagonal")
        p.add_argument("--c", type=float, help="tridiag sub-diagonal")
    p.add_argument("--qubits", type=int)
    p.add_argument("--layers", type=int, help="ansatz layers d (default n)")
    p.add_argument("--epsilon", type=float, help="relative pruning threshold")
    p.add_argument("--workers", type=int, help=f"worker count (env {WORKERS_ENV})")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="report file; figures and traces go alongside")
    p.add_argument("--format", choices=("json", "csv"))
    p.add_argument("--config", help="JSON file of defaults")
    p.add_argument("--no-plots", action="store_true", help="skip figure rendering")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dvqls", description="Distributed variational quantum linear solver")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="Pauli decomposition and pruning of a matrix")
    _common(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("solve", help="optimise the ansatz for A x = b")
    _common(p)
    p.add_argument("--max-evals", type=int)
    p.add_argument("--tol", type=float, help="cost tolerance")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--entangler", choices=ENTANGLERS)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("estimate", help="closed-form gate and circuit counts")
    _common(p, problem=False)
    p.add_argument("--terms", type=int, help="LCU terms L")
    p.add_argument("--worst-case", action="store_true", help="L = 4^n")
    p.add_argument("--upto", type=int, help="emit rows n..UPTO")
    p.add_argument("--json", action="store_true", help="JSON on stdout instead of the table")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("bench", help="time one cost evaluation per worker count")
    _common(p)
    p.add_argument("--worker-list", default="1,2,4")
    p.add_argument("--bench-method", choices=METHODS, default="hadamard")
    p.add_argument("--pool", choices=("thread", "process"), default="thread")
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--entangler", choices=ENTANGLERS)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("scaling-report", help="speedup/efficiency from a timing CSV")
    _common(p, problem=False)
    p.add_argument("input", help="CSV of label,N,t or label,circuits,units,t")
    p.add_argument("--baseline", type=int, default=0, help="baseline row index")
    p.set_defaults(func=cmd_scaling_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve(args)
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"dvqls {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # structured runtime failure
        log.debug("runtime failure", exc_info=True)
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
