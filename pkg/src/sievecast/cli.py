"""Command-line interface: ``sievecast {screen,simulate,theory,bench}``.

Exit codes: 0 success, 2 usage or configuration error, 3 degenerate data.
"""

import argparse
import csv
import io
import json
import math
import os
import sys
import time

import numpy as np
from threadpoolctl import threadpool_limits

from ._config import config_context
from .config import ALGORITHMS, ScreenConfig, choose_algorithm, moderate_size_cap
from .exceptions import DegenerateResponse, SievecastError
from .matrix import DataMatrix, ResponseVector, correlation_scan, read_table
from .screening import basic_screen, db_sis
from .simulation import (
    COV_FAMILIES,
    DISTRIBUTIONS,
    METHODS,
    PRESETS,
    SimScenario,
    TableCell,
    TABLE_COLUMNS,
    generate,
    preset_cells,
    run_table,
    table_summary,
    theory_report,
)
from .thresholds import THRESHOLD_MODES, ThresholdSpec
from .twostage import two_stage_screen

SCHEMA_VERSION = "1.0"
SEED_ENV = "SIEVECAST_SEED"

EXIT_OK, EXIT_USAGE, EXIT_DEGENERATE = 0, 2, 3


class UsageError(Exception):
    pass


def _resolve_seed(seed):
    if seed is not None:
        return seed
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"{SEED_ENV}={env!r} is not an integer") from None
    return int(np.random.SeedSequence().entropy % 2**63)


def _dump_json(obj):
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _emit(text, output):
    if output in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(output, "w", newline="") as fh:
            fh.write(text)


def _screen_config(args, seed):
    return ScreenConfig(
        alpha=args.alpha,
        delta=args.delta,
        threshold=args.threshold,
        bootstrap_reps=args.bootstrap_reps,
        algorithm=getattr(args, "algorithm", "auto"),
        T=args.T,
        seed=seed,
    )


def _response_column(selector, names, width):
    if names is not None and selector in names:
        return names.index(selector)
    try:
        j = int(selector)
    except ValueError:
        raise UsageError(f"response column {selector!r} not found") from None
    if not 0 <= j < width:
        raise UsageError(f"response column {selector!r} not found (index out of range 0..{width - 1})")
    return j


def cmd_screen(args):
    start = time.perf_counter()
    seed = _resolve_seed(args.seed)
    values, names = read_table(args.input, args.format)
    j = _response_column(args.response, names, values.shape[1])
    if values.shape[1] < 2:
        raise UsageError("input needs at least one predictor column besides the response")
    keep = [c for c in range(values.shape[1]) if c != j]
    X = DataMatrix(values[:, keep], names=[names[c] for c in keep] if names else None)
    Y = ResponseVector(values[:, j])
    config = _screen_config(args, seed)
    algorithm = choose_algorithm(config, X.n, X.p)
    rng = np.random.default_rng(seed)
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "screen",
        "algorithm": algorithm,
        "n": X.n,
        "p": X.p,
        "response": names[j] if names else j,
        "k": None,
        "selected_indices": None,
        "selected_names": None,
        "trace": None,
        "runs": None,
        "integration": None,
        "config": config.to_dict(),
    }
    if algorithm == "basic":
        result = basic_screen(Y, X, config, rng)
        report["trace"] = [t.to_dict() for t in result.trace]
    else:
        result = two_stage_screen(Y, X, config, rng)
        report["k"] = result.runs[0].k
        report["runs"] = [r.to_dict() for r in result.runs]
        report["integration"] = result.integration.to_dict()
    selected = [int(c) for c in result.selected]
    report["selected_indices"] = selected
    if X.names is not None:
        report["selected_names"] = [X.names[c] for c in selected]
    if args.timing:
        report["wall_time_ms"] = (time.perf_counter() - start) * 1e3
    _emit(_dump_json(report), args.output)
    return EXIT_OK


def _simulate_cells(args, config):
    if args.preset:
        return preset_cells(args.preset, n=args.n, p=args.p, T=args.T, config=config)
    n = 200 if args.n is None else args.n
    p = 34_000 if args.p is None else args.p
    s = SimScenario(
        n, p, args.cov, args.r_star, args.rho1, args.dist, args.kappa
    )
    return [TableCell(s, args.method, config)]


def _table_csv(rows):
    out = io.StringIO()
    writer = csv.DictWriter(out, fieldnames=TABLE_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if v is None else v) for k, v in row.items()})
    return out.getvalue()


def cmd_simulate(args):
    if args.reps < 1:
        raise UsageError(f"--reps must be positive, got {args.reps}")
    seed = _resolve_seed(args.seed)
    config = _screen_config(args, None)
    cells = _simulate_cells(args, config)
    rows = table_summary(run_table(cells, args.reps, seed=seed))
    as_json = args.json or (args.output or "").endswith(".json")
    if as_json:
        text = _dump_json({
            "schema_version": SCHEMA_VERSION,
            "command": "simulate",
            "preset": args.preset,
            "seed": seed,
            "rows": rows,
        })
    else:
        text = _table_csv(rows)
    _emit(text, args.output)
    return EXIT_OK


def cmd_theory(args):
    seed = _resolve_seed(args.seed)
    rep = theory_report(
        args.n, args.p, args.alpha, kappa=args.kappa, mc_reps=args.mc_reps,
        rng=np.random.default_rng(seed),
    )
    body = {"schema_version": SCHEMA_VERSION, "command": "theory", "seed": seed}
    body.update(rep.to_dict())
    _emit(_dump_json(body), args.output)
    return EXIT_OK


def cmd_bench(args):
    n, p = args.n, args.p
    if n < 3 or p < 1:
        raise UsageError("bench needs n >= 3 and p >= 1")
    # generator output, stored matrix and standardized copy live together
    peak = 3 * 8 * n * p
    cap = args.mem_cap_gib * 2**30
    if peak > cap:
        raise UsageError(
            f"estimated peak memory {peak / 2**30:.2f} GiB exceeds --mem-cap-gib {args.mem_cap_gib:g}"
        )
    seed = _resolve_seed(args.seed)
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    data = generate(SimScenario(n, p, "identity", 0.9, kappa=min(10, p)), rng)
    t1 = time.perf_counter()
    data.X.standardized
    t2 = time.perf_counter()
    correlation_scan(data.X, data.Y)
    t3 = time.perf_counter()
    db_sis(data.Y, data.X, None, ThresholdSpec(args.alpha, "normal"), rng)
    t4 = time.perf_counter()
    scan_s = t3 - t2
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "bench",
        "n": n,
        "p": p,
        "generate_seconds": t1 - t0,
        "standardize_seconds": t2 - t1,
        "scan_seconds": scan_s,
        "columns_per_second": p / scan_s if scan_s > 0 else None,
        "screen_iteration_seconds": t4 - t3,
        "peak_memory_estimate_bytes": peak,
        "moderate_size_cap": moderate_size_cap(n, 0.03),
    }
    _emit(_dump_json(report), args.output)
    return EXIT_OK


def _unit_interval(text):
    v = float(text)
    if not 0.0 < v < 1.0 or math.isnan(v):
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {text}")
    return v


def _add_screen_options(sp):
    sp.add_argument("--alpha", type=_unit_interval, default=0.5)
    sp.add_argument("--delta", type=float, default=0.03)
    sp.add_argument("--threshold", choices=THRESHOLD_MODES, default="auto")
    sp.add_argument("--bootstrap-reps", type=int, default=500)
    sp.add_argument("--T", type=int, default=None)


def _add_run_options(sp):
    sp.add_argument("--seed", type=int, default=None,
                    help=f"master seed (falls back to ${SEED_ENV})")
    sp.add_argument("--threads", type=int, default=None,
                    help="worker threads (default: all cores); results do not depend on it")
    sp.add_argument("--output", "-o", default=None)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sievecast",
        description="Distribution-based iterative variable screening.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("screen", help="screen the predictors of a data file")
    sp.add_argument("--input", required=True)
    sp.add_argument("--format", choices=("csv", "svm1"), default=None)
    sp.add_argument("--response", required=True, help="column name or 0-based index")
    sp.add_argument("--algorithm", choices=ALGORITHMS, default="auto")
    sp.add_argument("--timing", action="store_true", help="add wall_time_ms to the report")
    _add_screen_options(sp)
    _add_run_options(sp)
    sp.set_defaults(func=cmd_screen)

    sp = sub.add_parser("simulate", help="replicate simulation tables")
    sp.add_argument("--preset", choices=PRESETS, default=None)
    sp.add_argument("--reps", type=int, default=50)
    sp.add_argument("--n", type=int, default=None)
    sp.add_argument("--p", type=int, default=None)
    sp.add_argument("--cov", choices=COV_FAMILIES, default="identity")
    sp.add_argument("--rho1", type=float, default=0.5)
    sp.add_argument("--dist", choices=DISTRIBUTIONS, default="gaussian")
    sp.add_argument("--r-star", type=_unit_interval, default=0.95)
    sp.add_argument("--kappa", type=int, default=10)
    sp.add_argument("--method", choices=METHODS, default="basic")
    sp.add_argument("--json", action="store_true", help="emit JSON instead of CSV")
    _add_screen_options(sp)
    _add_run_options(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("theory", help="false-selection calculator for the normal threshold")
    sp.add_argument("--n", type=int, default=300)
    sp.add_argument("--p", type=int, default=2000)
    sp.add_argument("--alpha", type=_unit_interval, default=0.5)
    sp.add_argument("--kappa", type=int, default=10)
    sp.add_argument("--mc-reps", type=int, default=100_000)
    _add_run_options(sp)
    sp.set_defaults(func=cmd_theory)

    sp = sub.add_parser("bench", help="time the correlation scan")
    sp.add_argument("--n", type=int, default=200)
    sp.add_argument("--p", type=int, default=34_000)
    sp.add_argument("--alpha", type=_unit_interval, default=0.5)
    sp.add_argument("--mem-cap-gib", type=float, default=16.0)
    _add_run_options(sp)
    sp.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "T", 0) is None:
        args.T = 10
    threads = args.threads
    if threads is not None and threads < 1:
        print("sievecast: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        # one BLAS thread per worker keeps every dot product on a fixed path
        with threadpool_limits(limits=1), config_context(n_jobs=threads):
            return args.func(args)
    except DegenerateResponse as exc:
        print(f"sievecast: degenerate data: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (SievecastError, UsageError, OSError) as exc:
        print(f"sievecast: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
