"""
Command-line interface for evrp-vns.

Subcommands: solve, validate, bench and fixture. Exit codes are 0 for
success, 1 for an invalid solution and 2 for any error.
"""

import argparse
import logging
import os
import random
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

from .bench import INSTANCE_SUFFIX, StopSpec, load_reference_scores, run_bench
from .construction import ConstructionId
from .core import read_solution, tour_weight, validate, write_solution
from .errors import EvrpError
from .instance import load_instance, write_instance
from .local_search import NeighborhoodSet
from .oracle import exact_solve, gen_fixture
from .result_cache import ResultCache
from .vns import SearchParams, solve

logger = logging.getLogger(__name__)

DATASET_DIR_ENV = "EVRP_DATASET_DIR"
WEIGHT_TOLERANCE = 0.01

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_ERROR = 2


def resolve_instance_path(name: str) -> Path:
    """``name`` as given, or looked up in $EVRP_DATASET_DIR (with or without suffix)."""
    path = Path(name)
    if path.exists():
        return path
    dataset = os.environ.get(DATASET_DIR_ENV)
    if dataset:
        for candidate in (Path(dataset) / name, Path(dataset) / f"{name}{INSTANCE_SUFFIX}"):
            if candidate.exists():
                return candidate
    raise FileNotFoundError(f"instance not found: {name}")


def _add_search_args(parser: argparse.ArgumentParser):
    group = parser.add_argument_group("search parameters")
    group.add_argument("--setup", type=str, default=None,
                       help="Setup string such as VNS_zga_c:14_ls:110_p:2_r:0.35; individual flags override it")
    group.add_argument("--construction", type=str, default=None, help="Construction, e.g. c14, c:0 or dbca_nn_zga (default: c14)")
    group.add_argument("--ls", type=str, default=None, help="AFS operator bits realloc-1/realloc-more/realloc-all (default: 110)")
    group.add_argument("-p", type=int, default=None, help="Perturbation cut points (default: 2)")
    group.add_argument("-r", type=float, default=None, help="Restart ratio, ITERS_MAX = ceil(r * n) (default: 0.35)")
    group.add_argument("--count-delta-evaluations", action="store_true",
                       help="Count move delta computations against the evaluation budget")
    group.add_argument("--size-basis", choices=("nodes", "customers"), default="nodes",
                       help="What n means in the evaluation cap and ITERS_MAX")


def _add_stop_args(parser: argparse.ArgumentParser):
    group = parser.add_argument_group("stop condition (default: 25000 evaluations per node)")
    exclusive = group.add_mutually_exclusive_group()
    exclusive.add_argument("--evals", type=int, default=None, help="Total evaluation cap")
    exclusive.add_argument("--evals-per-node", type=int, default=None, help="Evaluation cap per instance node")
    exclusive.add_argument("--time-limit", type=float, default=None, help="Wall-clock limit in seconds")
    exclusive.add_argument("--competition-time-limit", action="store_true",
                           help="Competition time limit (|I| + |F|) / 100 * nu hours")
    group.add_argument("--nu", type=int, default=None, help="Time-limit multiplier (default by instance size)")
    group.add_argument("--cpu-ratio", type=float, default=1.0, help="CPU speed ratio applied to the time limit")


def _add_logging_args(parser: argparse.ArgumentParser):
    parser.add_argument("--quiet", action="store_true", help="Only log warnings and errors")
    parser.add_argument("--verbose", action="store_true", help="Log debug detail")


def search_params(args: argparse.Namespace, seed: int = 1) -> SearchParams:
    params = SearchParams.from_setup_string(args.setup) if args.setup else SearchParams()
    overrides = {"seed": seed, "size_basis": args.size_basis, "count_delta_evaluations": args.count_delta_evaluations}
    if args.construction is not None:
        overrides["construction"] = ConstructionId.parse(args.construction)
    if args.ls is not None:
        overrides["neighborhoods"] = NeighborhoodSet.from_bits(args.ls)
    if args.p is not None:
        overrides["p"] = args.p
    if args.r is not None:
        overrides["r"] = args.r
    return replace(params, **overrides)


def stop_spec(args: argparse.Namespace) -> StopSpec:
    return StopSpec(
        evals=args.evals,
        evals_per_node=args.evals_per_node,
        time_limit=args.time_limit,
        reference_time=args.competition_time_limit,
        nu=args.nu,
        cpu_ratio=args.cpu_ratio,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evrp-vns",
        description="Variable Neighborhood Search solver for the Electric Vehicle Routing Problem",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    subparsers = parser.add_subparsers(dest="command", help="Command to run")

    solve_parser = subparsers.add_parser("solve", help="Solve one instance")
    solve_parser.add_argument("instance", type=str, help=f"Instance file or name under ${DATASET_DIR_ENV}")
    solve_parser.add_argument("--seed", type=int, default=1, help="Random seed (default: 1)")
    solve_parser.add_argument("-o", "--output", type=str, default=None,
                              help="Solution file (default: <instance name>.sol)")
    solve_parser.add_argument("--progress-csv", type=str, default=None,
                              help="Write progress records (elapsed_s, evals, best_weight) here")
    _add_search_args(solve_parser)
    _add_stop_args(solve_parser)
    _add_logging_args(solve_parser)

    validate_parser = subparsers.add_parser("validate", help="Check a solution file against an instance")
    validate_parser.add_argument("instance", type=str, help="Instance file")
    validate_parser.add_argument("solution", type=str, help="Solution file")
    validate_parser.add_argument("--tolerance", type=float, default=WEIGHT_TOLERANCE,
                                 help="Allowed difference between claimed and recomputed weight")
    _add_logging_args(validate_parser)

    bench_parser = subparsers.add_parser("bench", help="Run every instance with several seeds")
    bench_parser.add_argument("paths", nargs="*", help=f"Instance files or directories (default: ${DATASET_DIR_ENV})")
    bench_parser.add_argument("--runs", type=int, default=20, help="Runs (seeds) per instance (default: 20)")
    bench_parser.add_argument("--seed-base", type=int, default=1, help="First seed (default: 1)")
    bench_parser.add_argument("--workers", type=int, default=None, help="Worker processes (1 runs in-process)")
    bench_parser.add_argument("--references", type=str, default=None,
                              help="CSV of best-known scores (default: bundled reference scores)")
    bench_parser.add_argument("--csv", type=str, default=None, help="Write the report as CSV here")
    bench_parser.add_argument("--cache-path", type=str, default=None,
                              help="Result cache directory (default: $EVRP_CACHE_DIR or ~/.evrp_vns_cache)")
    bench_parser.add_argument("--no-cache", action="store_true", help="Do not read or write cached results")
    bench_parser.add_argument("--overwrite-cache", action="store_true", help="Remove cached results first")
    _add_search_args(bench_parser)
    _add_stop_args(bench_parser)
    _add_logging_args(bench_parser)

    fixture_parser = subparsers.add_parser("fixture", help="Generate tiny random instances",
                                           formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    fixture_parser.add_argument("output_dir", type=str, help="Directory for the instance files")
    fixture_parser.add_argument("--count", type=int, default=10, help="Number of instances")
    fixture_parser.add_argument("--customers", type=int, default=5, help="Customers per instance")
    fixture_parser.add_argument("--stations", type=int, default=2, help="Stations per instance")
    fixture_parser.add_argument("--seed", type=int, default=0, help="Generator seed")
    fixture_parser.add_argument("--solve", action="store_true",
                                help="Also write each instance's exact optimum as a solution file")
    _add_logging_args(fixture_parser)
    return parser


def configure_logging(args: argparse.Namespace):
    level = logging.INFO
    if getattr(args, "quiet", False):
        level = logging.WARNING
    elif getattr(args, "verbose", False):
        level = logging.DEBUG
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def cmd_solve(args: argparse.Namespace) -> int:
    path = resolve_instance_path(args.instance)
    inst = load_instance(path)
    params = search_params(args, seed=args.seed)
    stop = stop_spec(args).resolve(inst, params.size_basis)

    tour, stats = solve(inst, params, stop)
    weight = tour_weight(inst, tour)
    output = Path(args.output) if args.output else Path(f"{inst.name}.sol")
    write_solution(output, tour, weight)
    if args.progress_csv:
        stats.to_csv(args.progress_csv)

    print(f"Instance:    {inst.name}")
    print(f"Weight:      {weight:.2f}")
    print(f"Evaluations: {stats.evals_used}")
    print(f"Iterations:  {stats.iterations} ({stats.restarts} restarts)")
    print(f"Time:        {stats.elapsed_s:.1f}s")
    print(f"Solution:    {output}")
    if args.progress_csv:
        print(f"Progress:    {args.progress_csv}")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    inst = load_instance(resolve_instance_path(args.instance))
    tour, claimed = read_solution(args.solution)
    report = validate(inst, tour)
    weight = tour_weight(inst, tour)

    if report.valid:
        print(f"VALID, weight {weight:.2f}")
    else:
        print(f"INVALID, weight {weight:.2f}")
        for line in report.summary().splitlines()[1:]:
            print(line)

    status = EXIT_OK if report.valid else EXIT_INVALID
    if claimed is not None and abs(claimed - weight) > args.tolerance:
        print(f"Weight mismatch: file claims {claimed:.2f}, recomputed {weight:.2f}")
        status = EXIT_INVALID
    return status


def cmd_bench(args: argparse.Namespace) -> int:
    paths: List[str] = list(args.paths)
    if not paths:
        dataset = os.environ.get(DATASET_DIR_ENV)
        if not dataset:
            print(f"ERROR: no instance paths given and ${DATASET_DIR_ENV} is not set", file=sys.stderr)
            return EXIT_ERROR
        paths = [dataset]

    references = load_reference_scores(args.references)
    cache = None if args.no_cache else ResultCache(args.cache_path, overwrite=args.overwrite_cache)
    try:
        report = run_bench(
            paths,
            search_params(args),
            stop_spec(args),
            runs=args.runs,
            seed_base=args.seed_base,
            workers=args.workers,
            references=references,
            cache=cache,
        )
    finally:
        if cache is not None:
            cache.shutdown()

    print(report.to_table())
    if args.csv:
        report.to_csv(args.csv)
        print(f"\nCSV report: {args.csv}")
    if cache is not None:
        stats = cache.get_stats()
        print(f"Cache: {stats['hits']} hits, {stats['misses']} misses ({stats['cache_file']})")
    return EXIT_OK


def cmd_fixture(args: argparse.Namespace) -> int:
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = random.Random(args.seed)
    for k in range(args.count):
        name = f"fixture-{args.seed}-{k:03d}"
        inst = gen_fixture(rng, args.customers, args.stations, name=name)
        path = write_instance(inst, out_dir / f"{name}{INSTANCE_SUFFIX}")
        line = f"{path}"
        if args.solve:
            weight, tour = exact_solve(inst)
            write_solution(out_dir / f"{name}.sol", tour, weight)
            line += f"  optimum {weight:.2f}"
        print(line)
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "validate": cmd_validate,
    "bench": cmd_bench,
    "fixture": cmd_fixture,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for the evrp-vns CLI."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command not in COMMANDS:
        parser.print_help()
        return EXIT_ERROR

    configure_logging(args)
    try:
        return COMMANDS[args.command](args)
    except (EvrpError, OSError, ValueError) as e:
        print(f"ERROR: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
