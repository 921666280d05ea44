"""
Multi-seed benchmark harness.

Every instance is solved once per seed; seeds run in parallel worker
processes, each owning its whole run. Per instance the report gives the best,
mean and (population) standard deviation of the final weights, and the gaps
``100 * (score / BKS - 1)`` when a best-known score is available.
"""

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, TextIO, Union

import numpy as np

from .errors import EvrpError
from .hashing import instance_digest
from .instance import Instance, load_instance
from .result_cache import ResultCache, RunResult
from .vns import SearchParams, StopCondition, solve, with_seed

logger = logging.getLogger(__name__)

REFERENCE_SCORES = Path(__file__).parent / "data" / "reference_scores.csv"
INSTANCE_SUFFIX = ".evrp"

# Stable contract; append new columns at the end only.
CSV_COLUMNS = (
    "instance", "runs", "min", "mean", "stdev", "bks",
    "gap_min", "gap_mean", "best_ref", "mean_ref", "error",
)


@dataclass(frozen=True)
class StopSpec:
    """
    Instance-independent description of a stop condition.

    Exactly one of ``evals``, ``evals_per_node``, ``time_limit`` or
    ``reference_time`` selects the stop; with none set, 25000 evaluations
    per node apply.
    """

    evals: Optional[int] = None
    evals_per_node: Optional[int] = None
    time_limit: Optional[float] = None
    reference_time: bool = False
    nu: Optional[int] = None
    cpu_ratio: float = 1.0

    def __post_init__(self):
        chosen = [
            self.evals is not None, self.evals_per_node is not None,
            self.time_limit is not None, self.reference_time,
        ]
        if sum(chosen) > 1:
            raise ValueError("choose at most one of evals, evals_per_node, time_limit and reference_time")

    def resolve(self, inst: Instance, size_basis: str = "nodes") -> StopCondition:
        if self.evals is not None:
            return StopCondition.evaluation_cap(self.evals)
        if self.time_limit is not None:
            return StopCondition.wall_clock(self.time_limit)
        if self.reference_time:
            return StopCondition.reference_time(inst, self.nu, self.cpu_ratio)
        if self.evals_per_node is not None:
            return StopCondition.evaluations(inst, self.evals_per_node, size_basis)
        return StopCondition.evaluations(inst, size_basis=size_basis)


def gap(score: float, bks: float) -> float:
    return 100.0 * (score / bks - 1.0)


def load_reference_scores(path: Union[str, Path, None] = None) -> Dict[str, float]:
    """Best-known scores by instance name from a CSV with ``instance`` and ``bks`` columns."""
    path = Path(path) if path is not None else REFERENCE_SCORES
    with open(path, newline="") as f:
        return {row["instance"].strip(): float(row["bks"]) for row in csv.DictReader(f) if row.get("instance")}


def find_instances(paths: Sequence[Union[str, Path]]) -> List[Path]:
    """Expand directories into their ``*.evrp`` files; files are kept as given."""
    found: List[Path] = []
    for p in map(Path, paths):
        if p.is_dir():
            found.extend(sorted(p.glob(f"*{INSTANCE_SUFFIX}")))
        else:
            found.append(p)
    return found


@dataclass
class BenchRow:
    instance: str
    runs: int
    min: Optional[float] = None
    mean: Optional[float] = None
    stdev: Optional[float] = None
    bks: Optional[float] = None
    gap_min: Optional[float] = None
    gap_mean: Optional[float] = None
    best_ref: Optional[float] = None
    mean_ref: Optional[float] = None
    error: str = ""

    @classmethod
    def from_weights(cls, instance: str, weights: Sequence[float], bks: Optional[float] = None) -> "BenchRow":
        values = np.asarray(weights, dtype=float)
        row = cls(
            instance, len(values),
            min=float(values.min()), mean=float(values.mean()), stdev=float(values.std(ddof=0)),
            bks=bks,
        )
        if bks:
            row.gap_min, row.gap_mean = gap(row.min, bks), gap(row.mean, bks)
            row.best_ref, row.mean_ref = row.min / bks, row.mean / bks
        return row


@dataclass
class BenchReport:
    rows: List[BenchRow] = field(default_factory=list)
    runs: int = 0
    seeds: List[int] = field(default_factory=list)

    def to_table(self) -> str:
        """Aligned plain-text table."""
        header = ["instance", "min", "mean", "stdev", "bks", "gap_min%", "gap_mean%"]
        lines = [header]
        for row in self.rows:
            lines.append([
                row.instance, _num(row.min), _num(row.mean), _num(row.stdev),
                _num(row.bks), _num(row.gap_min), _num(row.gap_mean),
            ])
        widths = [max(len(line[k]) for line in lines) for k in range(len(header))]
        text = []
        for line, row in zip(lines, [None] + self.rows):
            cells = "  ".join(
                f"{cell:<{widths[k]}}" if k == 0 else f"{cell:>{widths[k]}}" for k, cell in enumerate(line)
            )
            if row is not None and row.error:
                cells += f"  ERROR: {row.error}"
            text.append(cells)
        text.append(f"runs={self.runs} seeds={self.seeds[0]}..{self.seeds[-1]}" if self.seeds else f"runs={self.runs}")
        return "\n".join(text)

    def write_csv(self, out: TextIO) -> None:
        writer = csv.DictWriter(out, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for row in self.rows:
            record = asdict(row)
            writer.writerow({k: _csv_value(record[k]) for k in CSV_COLUMNS})

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as f:
            self.write_csv(f)
        return path


def _num(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.2f}"


def _csv_value(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6f}"
    return value


def run_one(path: str, params: SearchParams, stop: StopSpec, seed: int) -> RunResult:
    """Solve one (instance, seed) pair; module-level so worker processes can pickle it."""
    inst = load_instance(path)
    tour, stats = solve(inst, with_seed(params, seed), stop.resolve(inst, params.size_basis))
    return {
        "seed": seed,
        "weight": stats.best_weight,
        "evals": stats.evals_used,
        "elapsed_s": stats.elapsed_s,
        "tour": tour,
    }


def run_request(inst: Instance, params: SearchParams, stop: StopSpec, seeds: Sequence[int]) -> Dict:
    """The cache request for a bench entry; the seeds are not part of its key."""
    return {
        "instance": instance_digest(inst),
        "p": params.p,
        "r": params.r,
        "construction": str(params.construction),
        "ls": params.neighborhoods.bits,
        "count_delta_evaluations": params.count_delta_evaluations,
        "size_basis": params.size_basis,
        "stop": str(stop.resolve(inst, params.size_basis)),
        "seeds": list(seeds),
    }


def run_bench(
    paths: Sequence[Union[str, Path]],
    params: SearchParams,
    stop: StopSpec,
    runs: int = 20,
    seed_base: int = 1,
    workers: Optional[int] = None,
    references: Optional[Dict[str, float]] = None,
    cache: Optional[ResultCache] = None,
) -> BenchReport:
    """
    Solve every instance with seeds ``seed_base .. seed_base + runs - 1``.

    A failing instance or run is recorded in its row's ``error`` column and
    the bench carries on.

    Args:
        paths: Instance files or directories of ``*.evrp`` files
        params: Search parameters; the seed is replaced per run
        stop: Stop condition, resolved per instance
        runs: Runs per instance
        seed_base: First seed
        workers: Worker processes; 1 runs everything in this process
        references: Best-known scores by instance name
        cache: Result cache; seeds found there are not run again
    """
    if runs < 1:
        raise ValueError(f"runs must be at least 1, got {runs}")
    seeds = list(range(seed_base, seed_base + runs))
    references = references or {}
    report = BenchReport(runs=runs, seeds=seeds)

    files = find_instances(paths)
    logger.info("Benchmarking %d instances x %d runs", len(files), runs)
    pool = ProcessPoolExecutor(max_workers=workers) if workers != 1 else None
    try:
        for path in files:
            report.rows.append(_bench_instance(path, params, stop, seeds, references, cache, pool))
    finally:
        if pool is not None:
            pool.shutdown()
    return report


def _bench_instance(
    path: Path,
    params: SearchParams,
    stop: StopSpec,
    seeds: List[int],
    references: Dict[str, float],
    cache: Optional[ResultCache],
    pool: Optional[ProcessPoolExecutor],
) -> BenchRow:
    name = path.stem
    try:
        inst = load_instance(path)
        request = run_request(inst, params, stop, seeds)
    except (OSError, EvrpError, ValueError) as e:
        logger.warning("Skipping %s: %s", path, e)
        return BenchRow(name, 0, error=str(e))
    name = inst.name or name

    results: Dict[int, RunResult] = {}
    missing = seeds
    if cache is not None:
        results, missing = cache.get(request)
        if results:
            logger.info("%s: %d of %d runs cached", name, len(results), len(seeds))

    fresh: Dict[int, RunResult] = {}
    errors: List[str] = []
    if pool is None:
        for seed in missing:
            try:
                fresh[seed] = run_one(str(path), params, stop, seed)
            except EvrpError as e:
                errors.append(f"seed {seed}: {e}")
    else:
        futures = {seed: pool.submit(run_one, str(path), params, stop, seed) for seed in missing}
        for seed, future in futures.items():
            try:
                fresh[seed] = future.result()
            except Exception as e:
                errors.append(f"seed {seed}: {e}")
    for message in errors:
        logger.warning("%s: run failed, %s", name, message)

    if cache is not None and fresh:
        cache.put(request, fresh)
    results.update(fresh)

    weights = [results[seed]["weight"] for seed in seeds if seed in results]
    if not weights:
        return BenchRow(name, 0, bks=references.get(name), error="; ".join(errors) or "no runs")
    row = BenchRow.from_weights(name, weights, references.get(name))
    row.error = "; ".join(errors)
    logger.info("%s: min %.2f mean %.2f stdev %.2f", name, row.min, row.mean, row.stdev)
    return row
