"""Command-line driver.

    pcfgppl compile MODEL.cppl --emit {ast,anf,analysis,stmt,blocks,frames,pcfg}
    pcfgppl run MODEL.cppl [--particles N] [--seed S] [--ess-threshold T] ...
    pcfgppl gen-ssm-data --steps T [--seed S] [--out FILE]

Exit codes: 0 success, 1 inference error, 2 usage or compile error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from collections import defaultdict

import numpy as np

from .codegen import STAGES, compile_source
from .errors import CompileError, InferenceError, VMError
from .oracles import SsmParams, simulate_ssm
from .pcfgvm import STOP, initial_state, result_value, sim
from .rng import Rng, derive_key
from .smc import SmcConfig, run_smc

SCHEMA = 1

EXIT_OK, EXIT_INFERENCE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except FileNotFoundError:
        raise UsageError(f"{path}: no such file") from None
    except IsADirectoryError:
        raise UsageError(f"{path}: is a directory") from None


def _compile(path: str):
    return compile_source(_read(path))


def _format_compile_error(path, e: CompileError) -> str:
    where = f":{e.loc[0]}:{e.loc[1]}" if e.loc else ""
    return f"{path}{where}: {e.stage} error: {e.message}"


# ------------------------------------------------------------------ reports


def _jsonable(v):
    if isinstance(v, tuple):
        return [_jsonable(x) for x in v]
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def histogram(values, weights, bins: int, lo=None, hi=None) -> list:
    """``[lo, hi, count, normWeight]`` rows over equal-width bins."""
    if bins < 1:
        raise UsageError("--histogram needs at least one bin")
    xs = np.asarray([float(v) for v in values])
    w = np.asarray(weights, dtype=float)
    lo = float(xs.min()) if lo is None else lo
    hi = float(xs.max()) if hi is None else hi
    if hi <= lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, bins + 1)
    idx = np.clip(np.searchsorted(edges, xs, side="right") - 1, 0, bins - 1)
    inside = (xs >= lo) & (xs <= hi)
    counts = np.bincount(idx[inside], minlength=bins)
    mass = np.bincount(idx[inside], weights=w[inside], minlength=bins)
    return [[float(edges[i]), float(edges[i + 1]), int(counts[i]), float(mass[i])]
            for i in range(bins)]


def aggregate_samples(values, weights) -> list:
    """Distinct values with their total normalized weight, sorted by value."""
    acc = defaultdict(float)
    for v, w in zip(values, weights):
        acc[v] += float(w)
    return [[_jsonable(v), acc[v]] for v in sorted(acc, key=lambda x: (repr(type(x)), x))]


def build_report(path, cfg: SmcConfig, program, result, compile_s: float, bins=None,
                 hist_range=None, timings: bool = True) -> dict:
    values = result.values(program)
    report = {
        "schema": SCHEMA,
        "model": path,
        "config": {"particles": cfg.particles, "seed": cfg.seed,
                   "essThreshold": cfg.ess_threshold, "stackCells": cfg.stack_cells},
        "logZ": _jsonable(result.log_z),
        "resampleCount": result.resample_count,
    }
    numeric = all(_is_number(v) for v in values)
    if numeric:
        report["posteriorMean"] = float(np.dot([float(v) for v in values], result.weights))
    if bins is not None:
        if not numeric:
            raise UsageError("--histogram needs a numeric program result")
        lo, hi = hist_range if hist_range else (None, None)
        report["histogram"] = histogram(values, result.weights, bins, lo, hi)
    else:
        report["samples"] = aggregate_samples(values, result.weights)
    if timings:
        report["timingsMs"] = {
            "compile": compile_s * 1e3,
            "propagate": result.timings["propagate"] * 1e3,
            "resample": result.timings["resample"] * 1e3,
            "total": (compile_s + result.timings["total"]) * 1e3,
        }
    return report


def report_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if "histogram" in report:
        w.writerow(["lo", "hi", "count", "normWeight"])
        w.writerows(report["histogram"])
    else:
        w.writerow(["value", "weight"])
        for v, wt in report["samples"]:
            w.writerow([json.dumps(v) if isinstance(v, list) else v, wt])
    return buf.getvalue()


# ------------------------------------------------------------------ commands


def cmd_compile(args) -> int:
    comp = _compile(args.model)
    sys.stdout.write(comp.emit(args.emit).rstrip("\n") + "\n")
    return EXIT_OK


def _trace_one(program, seed, capacity, out):
    s = initial_state(program, Rng(derive_key(seed, 0, 0)), capacity)
    b = s.next
    steps = 0
    while True:
        trace = []
        b, s, flag = sim(program, b, s, trace)
        for blk, kind in trace:
            out.write(f"trace: -> {'stop' if blk == STOP else blk} (kind {kind})\n")
        out.write(f"trace: sim returned ({'stop' if b == STOP else b}, checkpoint={flag})\n")
        steps += 1
        if b == STOP:
            out.write(f"trace: result {result_value(program, s)!r}, logWeight {s.logw}\n")
            return


def cmd_run(args) -> int:
    t0 = time.perf_counter()
    comp = _compile(args.model)
    compile_s = time.perf_counter() - t0
    threads = args.threads if args.threads is not None else (os.cpu_count() or 1)
    try:
        cfg = SmcConfig(particles=args.particles, seed=args.seed,
                        ess_threshold=args.ess_threshold, threads=threads,
                        stack_cells=args.stack_cells)
    except ValueError as e:
        raise UsageError(str(e)) from None
    if args.trace:
        _trace_one(comp.pcfg, args.seed, args.stack_cells, sys.stderr)
    result = run_smc(comp.pcfg, cfg)
    report = build_report(args.model, cfg, comp.pcfg, result, compile_s, args.histogram,
                          args.range, timings=not args.no_timings)
    if args.output == "json":
        sys.stdout.write(json.dumps(report, indent=2) + "\n")
    else:
        sys.stdout.write(report_csv(report))
        sys.stderr.write(f"logZ {report['logZ']}\n")
    return EXIT_OK


def cmd_gen_ssm_data(args) -> int:
    if args.steps < 1:
        raise UsageError("--steps must be at least 1")
    params = SsmParams(trans_var=args.process_var)
    if args.process_var < 0:
        raise UsageError("--process-var must be non-negative")
    _, ys = simulate_ssm(params, args.steps, args.seed)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "y"])
    for t, y in enumerate(ys, start=1):
        w.writerow([t, f"{y:.4f}"])
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pcfgppl", description="Compile and run probabilistic programs as PCFGs.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("compile", help="print one compilation stage")
    c.add_argument("model")
    c.add_argument("--emit", choices=STAGES, default="pcfg")
    c.set_defaults(func=cmd_compile)

    r = sub.add_parser("run", help="run SMC inference")
    r.add_argument("model")
    r.add_argument("--particles", type=int, default=10_000)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--ess-threshold", type=float, default=1.0)
    r.add_argument("--threads", type=int, default=None, help="default: all cores")
    r.add_argument("--stack-cells", type=int, default=4096)
    r.add_argument("--output", choices=("json", "csv"), default="json")
    r.add_argument("--histogram", type=int, default=None, metavar="BINS")
    r.add_argument("--range", type=float, nargs=2, default=None, metavar=("LO", "HI"))
    r.add_argument("--no-timings", action="store_true",
                   help="leave wall-clock timings out of the report")
    r.add_argument("--trace", action="store_true",
                   help="print the block transitions of one particle to stderr first")
    r.set_defaults(func=cmd_run)

    g = sub.add_parser("gen-ssm-data", help="simulate observations of the state-space model")
    g.add_argument("--steps", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--process-var", type=float, default=1.0)
    g.add_argument("--out", default=None)
    g.set_defaults(func=cmd_gen_ssm_data)
    return p


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as e:
        sys.stderr.write(f"pcfgppl: {e}\n")
        return EXIT_USAGE
    except CompileError as e:
        sys.stderr.write(_format_compile_error(getattr(args, "model", "?"), e) + "\n")
        return EXIT_USAGE
    except (InferenceError, VMError) as e:
        sys.stderr.write(f"pcfgppl: inference error: {e}\n")
        return EXIT_INFERENCE
