"""Command line entry point: RBM benchmark, UAI inference and exact oracle."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import nullcontext
from dataclasses import dataclass

import numpy as np

from flatbp.inference import MAX_PRODUCT, SUM_PRODUCT, BPOptions, run_bp
from flatbp.oracle import (
    MAX_RBM_HIDDEN,
    BudgetExceededError,
    InfeasibleError,
    OracleBudget,
    brute_force_map,
    rbm_exact_map,
)
from flatbp.uai import InfeasibleFactorError, UaiParseError, read_uai, uai_to_graph
from flatbp.wiring import compile_graph, dump_wiring_csv
from flatbp.zoo import GENERATOR_NAME, rbm_for_units, rbm_to_factor_graph

SCHEMA_VERSION = "flatbp-bench-rbm/1"
CSV_COLUMNS = [
    "schema_version",
    "units",
    "seed",
    "build_ms",
    "compile_ms",
    "infer_ms_mean",
    "infer_ms_std",
    "repeats",
    "iters",
    "damping",
    "score_lbp",
    "score_oracle",
    "exact_match",
    "iterations_run",
    "oracle_ms",
]
TIMING_COLUMNS = {"build_ms", "compile_ms", "infer_ms_mean", "infer_ms_std", "oracle_ms"}
EXACT_MATCH_TOL = 1e-9


class CliError(Exception):
    pass


@dataclass
class TrialRecord:
    units: int
    seed: int
    build_ms: float | None
    compile_ms: float | None
    infer_ms_mean: float | None
    infer_ms_std: float | None
    repeats: int
    iters: int
    damping: float
    score_lbp: float
    score_oracle: float | None
    exact_match: bool | None
    iterations_run: int
    oracle_ms: float | None

    def row(self) -> dict:
        def fmt(x):
            if x is None:
                return ""
            if isinstance(x, bool):
                return "true" if x else "false"
            if isinstance(x, float):
                return repr(x)
            return x

        values = {k: fmt(getattr(self, k)) for k in CSV_COLUMNS[1:]}
        return {"schema_version": SCHEMA_VERSION, **values}


def _ms(seconds: float) -> float:
    return seconds * 1000.0


def run_rbm_trial(
    units: int,
    seed: int,
    iters: int,
    damping: float,
    oracle: bool,
    repeats: int,
    timed: bool = True,
) -> TrialRecord:
    t0 = time.perf_counter()
    rbm = rbm_for_units(units, seed)
    graph, evidence = rbm_to_factor_graph(rbm)
    t1 = time.perf_counter()
    compiled = compile_graph(graph)
    t2 = time.perf_counter()
    options = BPOptions(mode=MAX_PRODUCT, num_iters=iters, damping=damping)

    times = []
    result = None
    for _ in range(max(repeats, 1)):
        start = time.perf_counter()
        _, result = run_bp(compiled, evidence, options)
        times.append(_ms(time.perf_counter() - start))

    score_oracle = exact = oracle_ms = None
    if oracle:
        start = time.perf_counter()
        _, score_oracle = rbm_exact_map(rbm)
        oracle_ms = _ms(time.perf_counter() - start)
        exact = bool(abs(result.score - score_oracle) <= EXACT_MATCH_TOL)

    return TrialRecord(
        units=units,
        seed=seed,
        build_ms=_ms(t1 - t0) if timed else None,
        compile_ms=_ms(t2 - t1) if timed else None,
        infer_ms_mean=float(np.mean(times)) if timed else None,
        infer_ms_std=float(np.std(times)) if timed else None,
        repeats=max(repeats, 1),
        iters=iters,
        damping=damping,
        score_lbp=result.score,
        score_oracle=score_oracle,
        exact_match=exact,
        iterations_run=result.iterations_run,
        oracle_ms=oracle_ms if timed else None,
    )


def _thread_limit(threads: int | None):
    if not threads:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=threads)


def cmd_bench_rbm(args, out) -> int:
    for units in args.units:
        if units < 2 or units % 2:
            raise CliError(f"--units must be even and >= 2, got {units}")
    oracle = args.oracle
    if oracle == "auto":
        oracle = "on" if max(args.units) // 2 <= MAX_RBM_HIDDEN else "off"
    use_oracle = oracle == "on"
    if use_oracle:
        too_big = [u for u in args.units if u // 2 > MAX_RBM_HIDDEN]
        if too_big:
            raise BudgetExceededError(
                f"oracle enumerates 2^(units/2) hidden states and is capped at "
                f"{2 * MAX_RBM_HIDDEN} units; got {too_big}. Rerun with --oracle off "
                f"for timing-only rows."
            )

    jobs = [(u, args.seed + t) for u in args.units for t in range(args.trials)]
    timed = args.jobs <= 1
    with _thread_limit(args.threads):
        if timed:
            records = [
                run_rbm_trial(u, s, args.iters, args.damping, use_oracle, args.repeat)
                for u, s in jobs
            ]
        else:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                futures = [
                    pool.submit(
                        run_rbm_trial, u, s, args.iters, args.damping, use_oracle, 1, False
                    )
                    for u, s in jobs
                ]
                records = [f.result() for f in futures]

    writer = csv.DictWriter(out, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for rec in records:
        writer.writerow(rec.row())

    print(
        f"# parameters: iid N(0,1) biases and weights via {GENERATOR_NAME}; "
        f"iters={args.iters} damping={args.damping}",
        file=sys.stderr,
    )
    for units in args.units:
        rows = [r for r in records if r.units == units]
        line = f"# units={units} trials={len(rows)}"
        if use_oracle:
            hits = sum(bool(r.exact_match) for r in rows)
            line += f" exact={hits}/{len(rows)}"
        if timed:
            line += f" infer_ms_mean={np.mean([r.infer_ms_mean for r in rows]):.2f}"
        print(line, file=sys.stderr)
    return 0


def _load_model(path):
    model = read_uai(path)
    graph, evidence = uai_to_graph(model)
    return compile_graph(graph), evidence


def _finite_or_none(x: float):
    return x if math.isfinite(x) else None


def cmd_infer(args, out) -> int:
    compiled, evidence = _load_model(args.model)
    mode = MAX_PRODUCT if args.mode == "max" else SUM_PRODUCT
    options = BPOptions(
        mode=mode, num_iters=args.iters, damping=args.damping, convergence_tol=args.tol
    )
    _, result = run_bp(compiled, evidence, options)
    payload = {
        "mode": mode,
        "iterations_run": result.iterations_run,
        "final_delta": result.final_delta,
    }
    if mode == MAX_PRODUCT:
        payload["assignment"] = result.decoded.tolist()
        payload["score"] = _finite_or_none(result.score)
        payload["valid"] = math.isfinite(result.score)
    else:
        payload["marginals"] = [m.tolist() for m in result.marginals]
    _emit(args, out, payload)
    return 0


def cmd_oracle(args, out) -> int:
    compiled, evidence = _load_model(args.model)
    assignment, score = brute_force_map(
        compiled, evidence, OracleBudget(args.max_states)
    )
    _emit(args, out, {"assignment": assignment.tolist(), "score": score})
    return 0


def cmd_dump_wiring(args, out) -> int:
    compiled, _ = _load_model(args.model)
    for path in dump_wiring_csv(compiled, args.directory):
        print(path, file=out)
    return 0


def _emit(args, out, payload: dict) -> None:
    if args.json:
        json.dump(payload, out, indent=2)
        out.write("\n")
        return
    if "assignment" in payload:
        out.write("assignment: " + " ".join(map(str, payload["assignment"])) + "\n")
        score = payload["score"]
        out.write(f"score: {'invalid' if score is None else repr(score)}\n")
    if "marginals" in payload:
        for i, m in enumerate(payload["marginals"]):
            out.write(f"{i}: " + " ".join(repr(p) for p in m) + "\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flatbp", description="Loopy belief propagation on flat arrays."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("bench-rbm", help="MAP benchmark on random RBMs")
    bench.add_argument("--units", type=int, nargs="+", default=[30],
                       help="total units (hidden + visible); several sizes allowed")
    bench.add_argument("--trials", type=int, default=20)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--iters", type=int, default=200)
    bench.add_argument("--damping", type=float, default=0.5)
    bench.add_argument("--oracle", choices=["on", "off", "auto"], default="auto")
    bench.add_argument("--repeat", type=int, default=10,
                       help="timed inference runs per trial")
    bench.add_argument("--threads", type=int, default=None,
                       help="cap native thread pools used by numpy")
    bench.add_argument("--jobs", type=int, default=1,
                       help="parallel trial processes; >1 disables timing columns")
    bench.add_argument("--out", default="-")
    bench.set_defaults(func=cmd_bench_rbm)

    def add_bp_flags(p):
        p.add_argument("--iters", type=int, default=200)
        p.add_argument("--damping", type=float, default=0.5)
        p.add_argument("--tol", type=float, default=0.0)

    infer = sub.add_parser("infer", help="LBP on a UAI MARKOV model")
    infer.add_argument("--model", required=True)
    infer.add_argument("--mode", choices=["max", "sum"], default="max")
    add_bp_flags(infer)
    infer.add_argument("--json", action="store_true")
    infer.add_argument("--out", default="-")
    infer.set_defaults(func=cmd_infer)

    oracle = sub.add_parser("oracle", help="exact MAP by enumeration")
    oracle.add_argument("--model", required=True)
    oracle.add_argument("--max-states", type=int, default=OracleBudget().max_joint_states)
    oracle.add_argument("--json", action="store_true")
    oracle.add_argument("--out", default="-")
    oracle.set_defaults(func=cmd_oracle)

    dump = sub.add_parser("dump-wiring", help="write wiring tables as CSV files")
    dump.add_argument("--model", required=True)
    dump.add_argument("--directory", required=True)
    dump.add_argument("--out", default="-")
    dump.set_defaults(func=cmd_dump_wiring)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.out == "-":
            return args.func(args, sys.stdout)
        with open(args.out, "w", newline="") as fh:
            return args.func(args, fh)
    except (
        CliError,
        UaiParseError,
        InfeasibleFactorError,
        BudgetExceededError,
        InfeasibleError,
        ValueError,
        OSError,
    ) as exc:
        print(f"flatbp: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
