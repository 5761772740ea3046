"""``rcg run|check|bench`` command-line front end.

Exit codes: 0 converged / checks passed, 1 invalid configuration,
2 iteration cap reached, 3 line-search failure, 4 a check reported violations.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import diagnostics
from .geometry import GeometryError
from .linesearch import MODES, LineSearchConfig
from .manifolds import GrassmannGeometry, SpdBwGeometry, SphereGeometry
from .problems import PROBLEM_KINDS, generate_instance
from .solver import BETA_KINDS, SolverConfig, solve, trace_rows
from .transports import TRANSPORT_KINDS, ConfigurationError, ScalingPolicy, TransportRule

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_MAX_ITERS = 2
EXIT_LINESEARCH = 3
EXIT_CHECK_FAILED = 4

TERMINATION_EXIT = {"converged": EXIT_OK, "max_iters": EXIT_MAX_ITERS,
                    "linesearch_failure": EXIT_LINESEARCH}

TRACE_HEADER = ("iter", "f", "grad_norm", "rel_grad_norm", "step", "beta", "s_k",
                "dir_deriv", "zoutendijk_term", "restart", "time_ms")

DEFAULT_DIMS = {"rayleigh": (100,), "svd": (200, 100, 10), "lyapunov": (50,)}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2, which is reserved for the iteration cap
    def error(self, message):
        raise UsageError(message)


@dataclass(frozen=True)
class RunConfig:
    problem: str
    dims: tuple
    seed: int
    beta: str = "hs-dy"
    transport: str = "diff-retraction"
    scaling: str = "capped"
    linesearch: str = "armijo"
    c1: float = 1e-4
    c2: float = 0.1
    c3: float = 1000.0
    tol: float = 1e-6
    max_iters: int = 5000
    out: str = "-"
    format: str = "csv"

    def solver_config(self) -> SolverConfig:
        # as-paper: carried direction and gradient both used with unit scaling
        scaling = ScalingPolicy("unit" if self.scaling == "as-paper" else "capped")
        try:
            ls = LineSearchConfig(c1=self.c1, c2=self.c2, c3=self.c3, mode=self.linesearch)
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from None
        return SolverConfig(beta=self.beta, transport=TransportRule(self.transport),
                            scaling=scaling, linesearch=ls, tol=self.tol,
                            max_iters=self.max_iters)

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["dims"] = list(self.dims)
        return d


def parse_dims(text: str) -> tuple:
    try:
        dims = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise ConfigurationError(f"--dims must be a comma-separated list of integers, got {text!r}")
    return dims


def build_problem(cfg: RunConfig):
    try:
        return generate_instance(cfg.problem, cfg.dims, cfg.seed)
    except GeometryError as exc:
        raise ConfigurationError(str(exc)) from None


def validate(cfg: RunConfig):
    """Build problem and solver config, raising ConfigurationError on any conflict."""
    if cfg.max_iters < 0:
        raise ConfigurationError("--max-iters must be nonnegative")
    if not cfg.tol > 0:
        raise ConfigurationError("--tol must be positive")
    solver_cfg = cfg.solver_config()
    problem = build_problem(cfg)
    solver_cfg.transport.validate_for(problem.geometry)
    solver_cfg.grad_rule.validate_for(problem.geometry)
    return problem, solver_cfg


# output ------------------------------------------------------------------------


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def trace_csv(trace) -> str:
    buf = io.StringIO()
    buf.write(",".join(TRACE_HEADER) + "\n")
    for row in trace_rows(trace):
        buf.write(",".join(fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _json_float(v):
    v = float(v)
    return v if math.isfinite(v) else None


def trace_struct(trace, cfg: RunConfig | dict) -> str:
    rows = []
    for row in trace_rows(trace):
        rec = dict(zip(TRACE_HEADER, row))
        for key in TRACE_HEADER:
            if key in ("iter", "restart"):
                rec[key] = int(rec[key])
            else:
                rec[key] = _json_float(rec[key])
        rows.append(rec)
    doc = {
        "config": cfg.as_dict() if isinstance(cfg, RunConfig) else cfg,
        "termination": trace.termination,
        "message": trace.message,
        "iterations": trace.iterations,
        "final": {"f": _json_float(trace.f), "rel_grad_norm": _json_float(trace.rel_grad_norm),
                  "restarts": trace.restarts},
        "trace": rows,
    }
    if trace.monitor is not None:
        doc["monitor"] = {
            "regimes": list(trace.monitor.regimes),
            "violations": trace.monitor.violations(),
            "zoutendijk_sum": _json_float(trace.monitor.zoutendijk_sum),
        }
    return json.dumps(doc, indent=1) + "\n"


def write_atomic(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".rcg-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit(text: str, out: str):
    if out == "-":
        sys.stdout.write(text)
    else:
        write_atomic(out, text)


# run ---------------------------------------------------------------------------


def cmd_run(cfg: RunConfig) -> int:
    problem, solver_cfg = validate(cfg)
    trace = solve(problem, problem.initial_point, solver_cfg)
    text = trace_csv(trace) if cfg.format == "csv" else trace_struct(trace, cfg)
    emit(text, cfg.out)
    print(f"{trace.termination}: {trace.iterations} iterations, "
          f"rel-grad {trace.rel_grad_norm:.3e}, f {trace.f:.17g}", file=sys.stderr)
    if trace.message:
        print(trace.message, file=sys.stderr)
    return TERMINATION_EXIT[trace.termination]


# check -------------------------------------------------------------------------

CHECK_SUITES = ("gradients", "transports", "invariants", "example21")


def check_gradients(seed: int):
    results = []
    for kind, dims in (("rayleigh", (100,)), ("svd", (50, 30, 5)), ("lyapunov", (30,))):
        problem = generate_instance(kind, dims, seed)
        rng = np.random.default_rng(seed + 1)
        err = max(diagnostics.fd_gradient_check(problem, problem.geometry.random_point(rng), 1,
                                                rng=rng) for _ in range(10))
        results.append((f"fd {kind} {','.join(map(str, dims))}", err, 1e-6))
    geometry = SpdBwGeometry(30)
    rng = np.random.default_rng(seed)
    err = max(diagnostics.metric_compat_check(geometry, geometry.random_point(rng), 1, rng=rng)
              for _ in range(10))
    results.append(("bw metric compatibility", err, 1e-10))
    return results


def check_transports(seed: int):
    rule = TransportRule("projection")
    sphere = diagnostics.transport_bound_survey(SphereGeometry(100), rule, 1000, rng=seed)
    grass = diagnostics.transport_bound_survey(GrassmannGeometry(40, 5), rule, 1000, rng=seed)
    return [
        ("sphere S^99 projection ratio <= 1/4", sphere.max_ratio, 0.25),
        ("sphere S^99 projection ratio <= sharp constant", sphere.max_ratio, 0.2140),
        ("Grass(5,40) projection ratio <= 1/4", grass.max_ratio, 0.25),
    ]


def check_example21(seed: int):
    value = diagnostics.example21_norm()
    print(f"differentiated QR transport norm: {value:.15f} "
          f"(exact {diagnostics.EXAMPLE21_EXACT:.15f}, sqrt(6) = {math.sqrt(6):.15f})")
    return [("example21 |value - exact|", abs(value - diagnostics.EXAMPLE21_EXACT), 1e-10),
            ("example21 exceeds sqrt(6)", math.sqrt(6) - value, 0.0)]


def check_invariants(seed: int):
    results = []
    for label, trace in diagnostics.invariant_suite(seed):
        bad = trace.monitor.violations()
        count = sum(len(v) for v in bad.values())
        detail = f" {sorted(bad)}" if bad else ""
        results.append((f"{label}{detail}", float(count), 0.0))
    return results


def cmd_check(suite: str, seed: int) -> int:
    runner = {"gradients": check_gradients, "transports": check_transports,
              "invariants": check_invariants, "example21": check_example21}[suite]
    failed = 0
    for name, value, limit in runner(seed):
        ok = value <= limit
        failed += not ok
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {value:.6e} (limit {limit:g})")
    return EXIT_OK if not failed else EXIT_CHECK_FAILED


# bench -------------------------------------------------------------------------

SUMMARY_HEADER = ("method", "termination", "iterations", "final_rel_grad", "restarts",
                  "wall_ms", "x0_sha256")


def load_suite(path: str):
    """Suite file: JSON with problem/dims/seed, optional shared ``defaults`` and a
    ``methods`` list of per-method overrides (each with a ``name``)."""
    with open(path) as fh:
        spec = json.load(fh)
    base = dict(spec.get("defaults", {}))
    for key in ("problem", "dims", "seed"):
        if key not in spec:
            raise ConfigurationError(f"suite file needs a {key!r} entry")
    dims = spec["dims"]
    if isinstance(dims, str):
        dims = parse_dims(dims)
    methods = list(spec.get("methods", []))
    if not any(m.get("beta", base.get("beta")) == "sd" for m in methods):
        methods.insert(0, {"name": "sd", "beta": "sd"})
    configs = []
    allowed = set(RunConfig.__dataclass_fields__) - {"problem", "dims", "seed", "out", "format"}
    for m in methods:
        m = dict(m)
        name = m.pop("name", m.get("beta", "method"))
        merged = {**base, **m}
        unknown = set(merged) - allowed
        if unknown:
            raise ConfigurationError(f"unknown suite keys {sorted(unknown)} in method {name!r}")
        cfg = RunConfig(problem=spec["problem"], dims=tuple(int(d) for d in dims),
                        seed=int(spec["seed"]), **merged)
        configs.append((name, cfg))
    names = [n for n, _ in configs]
    if len(set(names)) != len(names):
        raise ConfigurationError("method names in a suite must be unique")
    return configs


def _x0_digest(x0) -> str:
    h = hashlib.sha256()
    for part in (x0 if isinstance(x0, tuple) else (x0,)):
        h.update(np.ascontiguousarray(part, dtype="<f8").tobytes())
    return h.hexdigest()[:16]


def _bench_member(args):
    name, cfg, out_dir, fmt_ = args
    problem, solver_cfg = validate(cfg)
    start = time.perf_counter()
    trace = solve(problem, problem.initial_point, solver_cfg)
    wall = (time.perf_counter() - start) * 1e3
    ext = "csv" if fmt_ == "csv" else "json"
    text = trace_csv(trace) if fmt_ == "csv" else trace_struct(trace, cfg)
    write_atomic(os.path.join(out_dir, f"{name}.{ext}"), text)
    return (name, trace.termination, trace.iterations, trace.rel_grad_norm, trace.restarts,
            wall, _x0_digest(problem.initial_point))


def cmd_bench(suite_path: str, out_dir: str, workers: int, fmt_: str) -> int:
    configs = load_suite(suite_path)
    for _, cfg in configs:
        validate(cfg)
    jobs = [(name, cfg, out_dir, fmt_) for name, cfg in configs]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_bench_member, jobs))
    else:
        rows = [_bench_member(j) for j in jobs]
    lines = [",".join(SUMMARY_HEADER)]
    for r in rows:
        lines.append(",".join((r[0], r[1], str(r[2]), fmt(r[3]), str(r[4]), fmt(r[5]), r[6])))
    write_atomic(os.path.join(out_dir, "summary.csv"), "\n".join(lines) + "\n")
    width = max(len(r[0]) for r in rows)
    print(f"{'method':<{width}}  {'termination':<18} {'iters':>6} {'rel-grad':>10} "
          f"{'restarts':>8} {'wall ms':>10}")
    for r in rows:
        print(f"{r[0]:<{width}}  {r[1]:<18} {r[2]:>6} {r[3]:>10.3e} {r[4]:>8} {r[5]:>10.1f}")
    return EXIT_OK


# entry point -------------------------------------------------------------------


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rcg", description="Riemannian conjugate-gradient solver")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="solve one seeded instance and write its trace")
    run.add_argument("--problem", choices=PROBLEM_KINDS, required=True)
    run.add_argument("--dims", help="comma list; default depends on --problem")
    run.add_argument("--beta", choices=BETA_KINDS, default="hs-dy")
    run.add_argument("--transport", choices=TRANSPORT_KINDS, default="diff-retraction")
    run.add_argument("--scaling", choices=("capped", "as-paper"), default="capped")
    run.add_argument("--linesearch", choices=MODES, default="armijo")
    run.add_argument("--c1", type=float, default=1e-4)
    run.add_argument("--c2", type=float, default=0.1)
    run.add_argument("--c3", type=float, default=1000.0)
    run.add_argument("--tol", type=float, default=1e-6)
    run.add_argument("--max-iters", type=int, default=5000)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", default="-", help="trace path, '-' for stdout")
    run.add_argument("--format", choices=("csv", "struct"), default="csv")

    check = sub.add_parser("check", help="run a diagnostic suite")
    check.add_argument("suite", choices=CHECK_SUITES + ("all",))
    check.add_argument("--seed", type=int, default=0)

    bench = sub.add_parser("bench", help="run every method of a suite file on one instance")
    bench.add_argument("suite_file")
    bench.add_argument("--out", default="bench-out", help="output directory")
    bench.add_argument("--workers", type=int, default=1)
    bench.add_argument("--format", choices=("csv", "struct"), default="csv")
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "run":
            dims = parse_dims(args.dims) if args.dims else DEFAULT_DIMS[args.problem]
            cfg = RunConfig(problem=args.problem, dims=dims, seed=args.seed, beta=args.beta,
                            transport=args.transport, scaling=args.scaling,
                            linesearch=args.linesearch, c1=args.c1, c2=args.c2, c3=args.c3,
                            tol=args.tol, max_iters=args.max_iters, out=args.out,
                            format=args.format)
            return cmd_run(cfg)
        if args.command == "check":
            suites = CHECK_SUITES if args.suite == "all" else (args.suite,)
            codes = [cmd_check(s, args.seed) for s in suites]
            return max(codes)
        if args.workers < 1:
            raise ConfigurationError("--workers must be at least 1")
        return cmd_bench(args.suite_file, args.out, args.workers, args.format)
    except (UsageError, ConfigurationError) as exc:
        print(f"rcg: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, json.JSONDecodeError) as exc:
        print(f"rcg: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
