"""
Variable Neighborhood Search driver.

Each restart builds a fresh initial tour T*; the inner loop perturbs T*,
descends with RVND and keeps the result whenever it is lighter. After
ceil(r * n) consecutive iterations without improvement the search restarts.
The lightest tour seen over all restarts, T**, is returned.
"""

import csv
import logging
import math
import random
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Callable, List, Optional, TextIO, Tuple, Union

from .construction import ConstructionId, construct
from .core import DEFAULT_EVALS_PER_NODE, EPS, EvalBudget, Tour, tour_weight, validate
from .errors import BudgetExhausted, ConstructionError, RepairError, SolverError
from .instance import Instance
from .local_search import NeighborhoodSet, rvnd
from .perturbation import PerturbParams, double_bridge

logger = logging.getLogger(__name__)

SIZE_BASES = ("nodes", "customers")

# Dimension thresholds for the reference-time multiplier.
NU_LIMITS = ((101, 1), (916, 2))
NU_MAX = 3

CSV_COLUMNS = ("elapsed_s", "evals", "best_weight")


def instance_size(inst: Instance, size_basis: str = "nodes") -> int:
    """n as used by the evaluation cap and ITERS_MAX: |V|, or the customer count."""
    if size_basis == "nodes":
        return inst.size
    if size_basis == "customers":
        return len(inst.customers)
    raise ValueError(f"size_basis must be one of {SIZE_BASES}, got {size_basis!r}")


@dataclass(frozen=True)
class SearchParams:
    """
    Tunables of one solver run.

    The defaults are the tuned setup ``VNS_zga_c:14_ls:110_p:2_r:0.35``.
    """

    p: int = 2
    r: float = 0.35
    construction: ConstructionId = field(default_factory=ConstructionId)
    neighborhoods: NeighborhoodSet = field(default_factory=NeighborhoodSet)
    seed: int = 1
    count_delta_evaluations: bool = False
    size_basis: str = "nodes"

    def __post_init__(self):
        PerturbParams(self.p)
        if self.r <= 0:
            raise ValueError(f"r must be positive, got {self.r}")
        if self.size_basis not in SIZE_BASES:
            raise ValueError(f"size_basis must be one of {SIZE_BASES}, got {self.size_basis!r}")

    @classmethod
    def from_setup_string(cls, setup: str, **overrides) -> "SearchParams":
        """
        Parse ``VNS_zga_c:14_ls:110_p:2_r:0.35``; missing keys keep their defaults.

        Raises:
            ValueError: On unknown keys or malformed values
        """
        values = {}
        for token in setup.strip().split("_"):
            if not token or ":" not in token:
                if token.lower() not in ("", "vns", "zga"):
                    raise ValueError(f"unexpected token {token!r} in setup {setup!r}")
                continue
            key, value = token.split(":", 1)
            key = key.lower()
            if key == "c":
                values["construction"] = ConstructionId.parse(f"c:{value}")
            elif key == "ls":
                values["neighborhoods"] = NeighborhoodSet.from_bits(value)
            elif key == "p":
                values["p"] = int(value)
            elif key == "r":
                values["r"] = float(value)
            else:
                raise ValueError(f"unknown setup key {key!r} in {setup!r}")
        values.update(overrides)
        return cls(**values)

    @property
    def setup_string(self) -> str:
        index = self.construction.c_index
        if index is None:
            raise ValueError(f"construction {self.construction} has no setup-string index")
        return f"VNS_zga_c:{index}_ls:{self.neighborhoods.bits}_p:{self.p}_r:{self.r:g}"

    def iters_max(self, inst: Instance) -> int:
        return max(1, math.ceil(self.r * instance_size(inst, self.size_basis)))


class StopKind(Enum):
    EVALUATIONS = "evaluations"
    WALL_CLOCK = "wall_clock"


@dataclass(frozen=True)
class StopCondition:
    """Either an evaluation cap or a wall-clock limit in seconds."""

    kind: StopKind
    eval_cap: Optional[int] = None
    time_cap: Optional[float] = None

    def __post_init__(self):
        if self.kind is StopKind.EVALUATIONS:
            if self.eval_cap is None or self.eval_cap < 0 or self.time_cap is not None:
                raise ValueError("an evaluation stop needs a non-negative eval_cap and no time_cap")
        elif self.time_cap is None or self.time_cap < 0 or self.eval_cap is not None:
            raise ValueError("a wall-clock stop needs a non-negative time_cap and no eval_cap")

    @classmethod
    def evaluations(
        cls, inst: Instance, per_node: int = DEFAULT_EVALS_PER_NODE, size_basis: str = "nodes"
    ) -> "StopCondition":
        return cls(StopKind.EVALUATIONS, eval_cap=per_node * instance_size(inst, size_basis))

    @classmethod
    def evaluation_cap(cls, cap: int) -> "StopCondition":
        return cls(StopKind.EVALUATIONS, eval_cap=cap)

    @classmethod
    def wall_clock(cls, seconds: float) -> "StopCondition":
        return cls(StopKind.WALL_CLOCK, time_cap=seconds)

    @classmethod
    def reference_time(cls, inst: Instance, nu: Optional[int] = None, cpu_ratio: float = 1.0) -> "StopCondition":
        """
        Competition time limit ``(|I| + |F|) / 100 * nu`` hours, scaled by a
        user-supplied CPU speed ratio. ``nu`` defaults by instance dimension.
        """
        if nu is None:
            nu = default_nu(inst)
        if cpu_ratio <= 0:
            raise ValueError(f"cpu_ratio must be positive, got {cpu_ratio}")
        hours = (len(inst.customers) + len(inst.stations)) / 100.0 * nu
        return cls.wall_clock(hours * 3600.0 * cpu_ratio)

    def budget(self, count_deltas: bool = False) -> EvalBudget:
        if self.kind is StopKind.EVALUATIONS:
            return EvalBudget(cap=self.eval_cap, count_deltas=count_deltas)
        return EvalBudget(deadline=self.time_cap, count_deltas=count_deltas)

    def __str__(self) -> str:
        if self.kind is StopKind.EVALUATIONS:
            return f"evals:{self.eval_cap}"
        return f"time:{self.time_cap:g}s"


def default_nu(inst: Instance) -> int:
    dimension = len(inst.customers) + 1
    for limit, nu in NU_LIMITS:
        if dimension <= limit:
            return nu
    return NU_MAX


@dataclass(frozen=True)
class ProgressRecord:
    elapsed_s: float
    evals: int
    best_weight: float


@dataclass
class RunStats:
    """
    Progress of one run: a record per incumbent improvement plus one per
    elapsed second, so the recorded weights never increase.
    """

    records: List[ProgressRecord] = field(default_factory=list)
    restarts: int = 0
    iterations: int = 0
    evals_used: int = 0
    elapsed_s: float = 0.0
    best_weight: float = math.inf
    on_record: Optional[Callable[[ProgressRecord], None]] = field(default=None, repr=False, compare=False)
    _next_tick: float = field(default=1.0, repr=False, compare=False)

    def _append(self, record: ProgressRecord) -> None:
        self.records.append(record)
        if self.on_record is not None:
            self.on_record(record)

    def record(self, elapsed_s: float, evals: int, best_weight: float) -> None:
        """Note a new incumbent; ignored unless it is lighter than the current one."""
        if best_weight >= self.best_weight:
            return
        self.tick(elapsed_s, evals)
        self.best_weight = best_weight
        self._append(ProgressRecord(elapsed_s, evals, best_weight))

    def tick(self, elapsed_s: float, evals: int) -> None:
        """Emit one record per whole second passed since the last tick."""
        if math.isinf(self.best_weight):
            return
        while elapsed_s >= self._next_tick:
            self._append(ProgressRecord(self._next_tick, evals, self.best_weight))
            self._next_tick += 1.0

    @property
    def improvements(self) -> int:
        weights = [r.best_weight for r in self.records]
        return sum(1 for a, b in zip([math.inf] + weights, weights) if b < a)

    def write_csv(self, out: TextIO) -> None:
        writer = csv.writer(out)
        writer.writerow(CSV_COLUMNS)
        for r in self.records:
            writer.writerow([f"{r.elapsed_s:.3f}", r.evals, f"{r.best_weight:.6f}"])

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as f:
            self.write_csv(f)
        return path


def solve(
    inst: Instance,
    params: Optional[SearchParams] = None,
    stop: Optional[StopCondition] = None,
    on_record: Optional[Callable[[ProgressRecord], None]] = None,
) -> Tuple[Tour, RunStats]:
    """
    Run the VNS until the stop condition is met.

    One ``random.Random(params.seed)`` feeds construction, RVND shuffles and
    perturbation, so an evaluation-capped run is fully reproducible. Each
    inner iteration costs one fitness evaluation for w(T), each restart one
    for w(T*), plus whatever construction and AFS-realloc-more spend.

    Args:
        inst: The instance
        params: Search parameters; the tuned defaults when omitted
        stop: Stop condition; 25000 evaluations per node when omitted
        on_record: Called with every progress record as it is produced

    Returns:
        (best_tour, stats)

    Raises:
        SolverError: If construction or repair fails on the instance
    """
    params = params or SearchParams()
    stop = stop or StopCondition.evaluations(inst, size_basis=params.size_basis)
    budget = stop.budget(params.count_delta_evaluations)
    rng = random.Random(params.seed)
    iters_max = params.iters_max(inst)
    stats = RunStats(on_record=on_record)

    best: Optional[Tour] = None
    best_weight = math.inf
    constructed: Optional[Tour] = None

    logger.info(
        "Solving %s (%d nodes) with p=%d r=%g construction=%s ls=%s seed=%d, stop %s, ITERS_MAX=%d",
        inst.name, inst.size, params.p, params.r, params.construction,
        params.neighborhoods.bits, params.seed, stop, iters_max,
    )
    try:
        while True:
            t_star = construct(inst, params.construction, rng, budget)
            constructed = t_star
            w_star = tour_weight(inst, t_star, budget)
            if w_star < best_weight:
                best, best_weight = t_star, w_star
                stats.record(budget.elapsed, budget.used, best_weight)
            logger.debug("Restart %d from weight %.2f", stats.restarts, w_star)

            non_improving = 0
            while non_improving < iters_max:
                t = rvnd(inst, double_bridge(inst, t_star, params.p, rng), params.neighborhoods, rng, budget)
                w = tour_weight(inst, t, budget)
                stats.iterations += 1
                if w < w_star - EPS:
                    t_star, w_star = t, w
                    non_improving = 0
                    if w_star < best_weight:
                        best, best_weight = t_star, w_star
                        stats.record(budget.elapsed, budget.used, best_weight)
                        logger.info("New best %.2f after %d evaluations", best_weight, budget.used)
                else:
                    non_improving += 1
                stats.tick(budget.elapsed, budget.used)
            stats.restarts += 1
            logger.info("Restart %d after %d evaluations (best %.2f)", stats.restarts, budget.used, best_weight)
    except BudgetExhausted:
        pass
    except (ConstructionError, RepairError) as e:
        raise SolverError(f"solver failed on {inst.name}: {e}") from e

    if best is None:
        if constructed is None:
            raise SolverError(f"no tour was constructed for {inst.name}")
        best, best_weight = constructed, tour_weight(inst, constructed)
        stats.record(budget.elapsed, budget.used, best_weight)

    stats.tick(budget.elapsed, budget.used)
    stats.evals_used = budget.used
    stats.elapsed_s = budget.elapsed

    report = validate(inst, best)
    if not report.valid:
        raise SolverError(f"solver returned an invalid tour for {inst.name}:\n{report.summary()}")
    logger.info(
        "Finished %s: weight %.2f, %d evaluations, %d iterations, %d restarts, %.1fs",
        inst.name, best_weight, stats.evals_used, stats.iterations, stats.restarts, stats.elapsed_s,
    )
    return best, stats


def with_seed(params: SearchParams, seed: int) -> SearchParams:
    return replace(params, seed=seed)
