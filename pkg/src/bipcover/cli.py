"""Command-line interface.

Four subcommands:

* ``bounds``   - all four sample-size bounds for one (k, t_min, q), as JSON.
* ``sweep``    - bounds over a parameter grid, as CSV (one row per cell).
* ``simulate`` - empirical genes-to-cover quantiles against the bounds on a
  generated or user-supplied species tree, as CSV.
* ``check``    - run a named verification suite and report pass/fail.

Conventions: CSV files start with a ``# schema=1`` comment, rows are emitted
in a deterministic order, and every stochastic row carries the seed that
reproduces it.  Exit codes: 0 success, 1 failed checks (or a fully failed
sweep), 2 usage or domain errors.  Worker-pool size comes from ``--threads``,
falling back to the BIPCOVER_THREADS environment variable, then to the CPU
count; results are assembled in submission order, so the output is identical
at any thread count.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import io
import json
import math
import os
import sys

from .bounds import BoundSpec, bound_report
from .checks import SUITES, run_suite
from .errors import (
    AlreadyBalanced,
    CapExceeded,
    DomainError,
    NeverSatisfiable,
    Overflow,
    UnstableEvaluation,
)
from .mscsim import DEFAULT_CAP, overestimation_experiment
from .streams import derive_seed
from .treegen import balanced, caterpillar, from_newick, yule

_FAILURES = (
    DomainError,
    Overflow,
    NeverSatisfiable,
    UnstableEvaluation,
    CapExceeded,
    AlreadyBalanced,
)

SWEEP_COLUMNS = (
    "k", "t_min", "q", "m_o", "m_c", "m_s", "m_b",
    "ratio_c", "ratio_s", "ratio_b", "error",
)
SIMULATE_COLUMNS = (
    "tree_kind", "k", "t_min", "q", "trials", "seed",
    "n_e", "m_o", "m_b", "ratio_o", "ratio_b", "error",
)


def _int_list(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part]


def _float_list(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part]


def _resolve_threads(requested: int | None) -> int:
    if requested is None:
        env = os.environ.get("BIPCOVER_THREADS", "").strip()
        requested = int(env) if env else (os.cpu_count() or 1)
    if requested < 1:
        raise DomainError("--threads must be >= 1")
    return requested


def _map_ordered(fn, items: list, threads: int) -> list:
    if threads == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    workers = min(threads, len(items))
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _write_csv(path: str, columns: tuple[str, ...], rows: list[dict]) -> None:
    buffer = io.StringIO()
    buffer.write("# schema=1\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([row.get(col, "") for col in columns])
    text = buffer.getvalue()
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)


# --------------------------------------------------------------------------
# bounds


def _cmd_bounds(args: argparse.Namespace) -> int:
    report = bound_report(BoundSpec(k=args.k, t_min=args.t_min, q=args.q))
    payload = {
        "k": args.k,
        "t_min": args.t_min,
        "q": args.q,
        "m_o": report.m_o,
        "m_c": report.m_c,
        "m_s": report.m_s,
        "m_b": report.m_b,
        "improvement_ratios": {
            "m_c": report.m_o / report.m_c,
            "m_s": report.m_o / report.m_s,
            "m_b": report.m_o / report.m_b,
        },
        "success_probabilities": {
            "original": report.h_original,
            "caterpillar": {str(l): v for l, v in report.h_caterpillar.items()},
            "one_step": {str(l): v for l, v in report.h_one_step.items()},
            "balanced": {str(l): v for l, v in report.h_balanced.items()},
        },
    }
    print(json.dumps(payload, indent=2))
    return 0


# --------------------------------------------------------------------------
# sweep


def _sweep_cell(cell: tuple[int, float, float]) -> dict:
    k, t_min, q = cell
    row = {"k": k, "t_min": t_min, "q": q, "error": ""}
    try:
        report = bound_report(BoundSpec(k=k, t_min=t_min, q=q))
    except _FAILURES as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row
    row.update(
        m_o=report.m_o,
        m_c=report.m_c,
        m_s=report.m_s,
        m_b=report.m_b,
        ratio_c=report.m_o / report.m_c,
        ratio_s=report.m_o / report.m_s,
        ratio_b=report.m_o / report.m_b,
    )
    return row


def _cmd_sweep(args: argparse.Namespace) -> int:
    if not (args.k and args.t_min and args.q):
        raise DomainError("each of -k, -t, -q needs at least one value")
    cells = [(k, t, q) for k in args.k for t in args.t_min for q in args.q]
    rows = _map_ordered(_sweep_cell, cells, _resolve_threads(args.threads))
    _write_csv(args.output, SWEEP_COLUMNS, rows)
    failed = sum(1 for row in rows if row["error"])
    if failed == len(rows):
        print(f"error: all {failed} sweep cells failed", file=sys.stderr)
        return 1
    if failed:
        print(f"warning: {failed} of {len(rows)} sweep cells failed", file=sys.stderr)
    return 0


# --------------------------------------------------------------------------
# simulate


def _build_tree(kind: str, k: int, t_min: float, seed: int, newick_text: str | None):
    if kind == "caterpillar":
        return caterpillar(k, t_min)
    if kind == "balanced":
        return balanced(k, t_min)
    if kind == "yule":
        return yule(k, t_min, seed)
    return from_newick(newick_text)


def _simulate_row(task: dict) -> dict:
    row = {key: task[key] for key in ("tree_kind", "k", "t_min", "q", "trials", "seed")}
    row["error"] = ""
    try:
        tree = _build_tree(
            task["tree_kind"], task["k"], task["t_min"], task["seed"], task["newick"]
        )
        spec = BoundSpec(k=task["k"], t_min=task["t_min"], q=task["q"])
        result = overestimation_experiment(
            tree, spec, task["trials"], task["seed"], cap=task["cap"]
        )
    except _FAILURES as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row
    row.update(
        n_e=result.n_e,
        m_o=result.m_o,
        m_b=result.m_b,
        ratio_o=result.ratio_o,
        ratio_b=result.ratio_b,
    )
    if result.capped:
        row["error"] = f"capped trials: {result.capped} of {result.trials}"
    return row


def _cmd_simulate(args: argparse.Namespace) -> int:
    newick_text = None
    if args.newick is not None:
        kind = "newick"
        with open(args.newick, "r", encoding="utf-8") as handle:
            newick_text = handle.read()
        tree = from_newick(newick_text)
        k = tree.n_taxa
        t_min = tree.internal_min_branch
        if args.k is not None and args.k != k:
            raise DomainError(f"-k {args.k} does not match the {k}-taxon Newick tree")
        if args.t_min is not None and not math.isclose(
            args.t_min, t_min, rel_tol=1e-9, abs_tol=0.0
        ):
            raise DomainError(
                f"-t {args.t_min} does not match the tree's minimum internal "
                f"branch {t_min!r}"
            )
    else:
        kind = args.tree
        if kind is None:
            raise DomainError("pick a tree via --tree or --newick")
        if args.k is None or args.t_min is None:
            raise DomainError("-k and -t are required unless --newick is used")
        k, t_min = args.k, args.t_min
    if args.replicates < 1:
        raise DomainError("--replicates must be >= 1")
    if args.replicates > 1 and kind != "yule":
        raise DomainError("--replicates applies only to yule trees")

    base = {
        "tree_kind": kind,
        "k": k,
        "t_min": t_min,
        "q": args.q,
        "trials": args.trials,
        "newick": newick_text,
        "cap": args.max_genes,
    }
    if kind == "yule":
        seeds = [derive_seed(args.seed, r, "yule") for r in range(args.replicates)]
    else:
        seeds = [args.seed]
    tasks = [dict(base, seed=seed) for seed in seeds]
    rows = _map_ordered(_simulate_row, tasks, _resolve_threads(args.threads))
    _write_csv(args.output, SIMULATE_COLUMNS, rows)
    return 0


# --------------------------------------------------------------------------
# check


def _cmd_check(args: argparse.Namespace) -> int:
    results = run_suite(args.suite)
    for result in results:
        tag = "PASS" if result.passed else "FAIL"
        print(f"{tag}  {result.name}: {result.detail}")
    failed = sum(1 for r in results if not r.passed)
    print(f"{len(results) - failed} passed, {failed} failed")
    return 1 if failed else 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bipcover",
        description="Sample-size bounds for bipartition cover under the "
        "multispecies coalescent.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_bounds = sub.add_parser("bounds", help="all four bounds for one instance")
    p_bounds.add_argument("-k", type=int, required=True, help="species count (>= 4)")
    p_bounds.add_argument("-t", "--t-min", type=float, required=True,
                          help="minimum internal branch length")
    p_bounds.add_argument("-q", type=float, required=True, help="target cover probability")
    p_bounds.set_defaults(handler=_cmd_bounds)

    p_sweep = sub.add_parser("sweep", help="bounds over a parameter grid")
    p_sweep.add_argument("-k", type=_int_list, required=True,
                         help="comma-separated species counts")
    p_sweep.add_argument("-t", "--t-min", type=_float_list, required=True,
                         help="comma-separated branch lengths")
    p_sweep.add_argument("-q", type=_float_list, required=True,
                         help="comma-separated probabilities")
    p_sweep.add_argument("-o", "--output", default="-", help="CSV path ('-' = stdout)")
    p_sweep.add_argument("--threads", type=int, default=None,
                         help="worker processes (default: BIPCOVER_THREADS or CPUs)")
    p_sweep.set_defaults(handler=_cmd_sweep)

    p_sim = sub.add_parser("simulate", help="empirical cover quantiles vs bounds")
    p_sim.add_argument("--tree", choices=("caterpillar", "balanced", "yule"),
                       help="generated tree family")
    p_sim.add_argument("--newick", help="path to a Newick species tree instead")
    p_sim.add_argument("-k", type=int, help="species count")
    p_sim.add_argument("-t", "--t-min", type=float, help="minimum internal branch length")
    p_sim.add_argument("-q", type=float, required=True, help="quantile / target probability")
    p_sim.add_argument("--trials", type=int, default=10000, help="independent trials")
    p_sim.add_argument("--seed", type=int, default=0, help="master seed")
    p_sim.add_argument("--replicates", type=int, default=1,
                       help="number of independent Yule trees")
    p_sim.add_argument("--max-genes", type=int, default=DEFAULT_CAP,
                       help="per-trial gene cap before giving up")
    p_sim.add_argument("-o", "--output", default="-", help="CSV path ('-' = stdout)")
    p_sim.add_argument("--threads", type=int, default=None,
                       help="worker processes (default: BIPCOVER_THREADS or CPUs)")
    p_sim.set_defaults(handler=_cmd_simulate)

    p_check = sub.add_parser("check", help="run a verification suite")
    p_check.add_argument("suite", choices=SUITES)
    p_check.set_defaults(handler=_cmd_check)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except _FAILURES as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
