"""
Tour representation, fitness, feasibility checking and evaluation budget.

A tour is a plain list of node ids that starts and ends at the depot. Depot
visits split it into subtours (one vehicle round trip each); AFS visits may
repeat freely.
"""

import time
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

from .errors import BudgetExhausted, MoveError, SolutionFormatError
from .instance import Instance, NodeId, NodeKind

Tour = List[NodeId]

# A move "improves" only when it lowers the weight by more than this.
EPS = 1e-9

DEFAULT_EVALS_PER_NODE = 25000


class ViolationKind(Enum):
    CUSTOMER_COVERAGE = "CustomerCoverage"
    CAPACITY_EXCEEDED = "CapacityExceeded"
    BATTERY_DEPLETED = "BatteryDepleted"
    ENDPOINT_NOT_DEPOT = "EndpointNotDepot"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    position: Optional[int]
    detail: str


@dataclass
class ValidationReport:
    """
    Outcome of simulating a tour against the EVRP constraints.

    ``load_trace[k]`` and ``charge_trace[k]`` hold the remaining cargo and
    energy on arrival at position ``k``.
    """

    valid: bool
    violations: List[Violation]
    load_trace: List[float]
    charge_trace: List[float]

    def kinds(self) -> set:
        return {v.kind for v in self.violations}

    def summary(self) -> str:
        if self.valid:
            return "VALID"
        lines = ["INVALID"]
        for v in self.violations:
            where = "-" if v.position is None else str(v.position)
            lines.append(f"  {v.kind.value} at {where}: {v.detail}")
        return "\n".join(lines)


@dataclass
class EvalBudget:
    """
    Monotone counter of fitness evaluations with a hard cap and an optional
    wall-clock deadline (seconds since ``start_time``).

    ``charge`` checks before counting, so ``used`` never exceeds ``cap``.
    """

    cap: Optional[int] = None
    deadline: Optional[float] = None
    count_deltas: bool = False
    used: int = 0
    start_time: float = field(default_factory=time.perf_counter)

    @classmethod
    def for_instance(
        cls,
        inst: Instance,
        evals_per_node: int = DEFAULT_EVALS_PER_NODE,
        deadline: Optional[float] = None,
    ) -> "EvalBudget":
        return cls(cap=evals_per_node * inst.size, deadline=deadline)

    @property
    def elapsed(self) -> float:
        return time.perf_counter() - self.start_time

    @property
    def remaining(self) -> Optional[int]:
        return None if self.cap is None else max(self.cap - self.used, 0)

    @property
    def out_of_time(self) -> bool:
        return self.deadline is not None and self.elapsed >= self.deadline

    @property
    def exhausted(self) -> bool:
        return (self.cap is not None and self.used >= self.cap) or self.out_of_time

    def charge(self, count: int = 1) -> None:
        """
        Count ``count`` evaluations.

        Raises:
            BudgetExhausted: If the deadline has passed or fewer than ``count``
                evaluations are left; the ones that still fit are counted
        """
        if self.out_of_time:
            raise BudgetExhausted(f"deadline of {self.deadline:.1f}s reached")
        if self.remaining is not None and count > self.remaining:
            self.used = max(self.used, self.cap)
            raise BudgetExhausted(f"evaluation cap {self.cap} reached")
        self.used += count

    def charge_delta(self, count: int = 1) -> None:
        if self.count_deltas:
            self.charge(count)


def tour_weight(inst: Instance, t: Sequence[NodeId], budget: Optional[EvalBudget] = None) -> float:
    """
    Total edge weight of ``t``.

    Counts one fitness evaluation against ``budget`` when one is given;
    bookkeeping callers pass no budget.
    """
    if budget is not None:
        budget.charge()
    distance = inst.distance
    return sum(distance(a, b) for a, b in zip(t, t[1:]))


def validate(
    inst: Instance,
    t: Sequence[NodeId],
    check_coverage: bool = True,
    check_capacity: bool = True,
    check_battery: bool = True,
) -> ValidationReport:
    """
    Simulate ``t`` left to right and report every violated constraint.

    Cargo resets to C at each depot visit; charge resets to Q at each depot or
    AFS visit. For capacity and battery only the first failing position is
    reported. Never counts against an evaluation budget.

    Raises:
        ValueError: If ``t`` references a node id outside the instance
    """
    violations: List[Violation] = []
    n = len(t)
    for k, node in enumerate(t):
        if not 0 <= node < inst.size:
            raise ValueError(f"position {k}: node id {node} outside 0..{inst.size - 1}")

    if n == 0:
        violations.append(Violation(ViolationKind.ENDPOINT_NOT_DEPOT, None, "empty tour"))
        return ValidationReport(False, violations, [], [])
    if t[0] != inst.depot:
        violations.append(Violation(ViolationKind.ENDPOINT_NOT_DEPOT, 0, f"tour starts at node {t[0]}"))
    if t[-1] != inst.depot:
        violations.append(Violation(ViolationKind.ENDPOINT_NOT_DEPOT, n - 1, f"tour ends at node {t[-1]}"))

    if check_coverage:
        counts = Counter(node for node in t if inst.kinds[node] is NodeKind.CUSTOMER)
        for customer in inst.customers:
            if counts[customer] == 0:
                violations.append(
                    Violation(ViolationKind.CUSTOMER_COVERAGE, None, f"customer {customer} not visited")
                )
        seen = set()
        for k, node in enumerate(t):
            if inst.kinds[node] is NodeKind.CUSTOMER:
                if node in seen:
                    violations.append(
                        Violation(ViolationKind.CUSTOMER_COVERAGE, k, f"customer {node} visited again")
                    )
                seen.add(node)

    capacity, battery, h = inst.cargo_capacity, inst.battery_capacity, inst.consumption_rate
    load, charge = capacity, battery
    load_trace, charge_trace = [load], [charge]
    capacity_failed = battery_failed = False
    for k in range(1, n):
        prev, node = t[k - 1], t[k]
        charge -= h * inst.distance(prev, node)
        load_trace.append(load)
        charge_trace.append(charge)
        if check_battery and not battery_failed and charge < -EPS:
            battery_failed = True
            violations.append(
                Violation(ViolationKind.BATTERY_DEPLETED, k, f"arrives at node {node} with charge {charge:.4f}")
            )
        kind = inst.kinds[node]
        if kind is NodeKind.CUSTOMER:
            demand = inst.demands[node]
            if check_capacity and not capacity_failed and load < demand - EPS:
                capacity_failed = True
                violations.append(
                    Violation(
                        ViolationKind.CAPACITY_EXCEEDED, k,
                        f"customer {node} demands {demand:g} with {load:g} left",
                    )
                )
            load -= demand
        elif kind is NodeKind.DEPOT:
            load, charge = capacity, battery
        else:
            charge = battery

    return ValidationReport(not violations, violations, load_trace, charge_trace)


def span_feasible(inst: Instance, t: Sequence[NodeId], start: int, stop: int) -> bool:
    """
    Capacity and battery feasibility of ``t[start..stop]``.

    ``t[start]`` must be a depot visit; the span is simulated from a full
    vehicle. Used to check only the subtours a move touched.
    """
    capacity, battery, h = inst.cargo_capacity, inst.battery_capacity, inst.consumption_rate
    kinds, demands, distance = inst.kinds, inst.demands, inst.distance
    load, charge = capacity, battery
    for k in range(start + 1, stop + 1):
        node = t[k]
        charge -= h * distance(t[k - 1], node)
        if charge < -EPS:
            return False
        kind = kinds[node]
        if kind is NodeKind.CUSTOMER:
            load -= demands[node]
            if load < -EPS:
                return False
        elif kind is NodeKind.DEPOT:
            load, charge = capacity, battery
        else:
            charge = battery
    return True


class MoveKind(Enum):
    TWO_OPT = "2-opt"
    TWO_STRING = "2-string"
    AFS_REALLOC_1 = "afs-realloc-1"
    AFS_REALLOC_MORE = "afs-realloc-more"


@dataclass(frozen=True)
class MoveDescriptor:
    """
    One candidate move.

    TWO_OPT reverses positions ``i..j``. TWO_STRING swaps the ``x`` nodes at
    ``i`` with the ``y`` nodes at ``j``. AFS_REALLOC_1 removes the AFS at
    position ``i`` and inserts ``afs`` on ``edge``, a pair of tour positions
    that are adjacent once position ``i`` is gone.
    """

    kind: MoveKind
    i: int
    j: int = 0
    x: int = 0
    y: int = 0
    afs: Optional[NodeId] = None
    edge: Optional[Tuple[int, int]] = None


def check_move(t: Sequence[NodeId], move: MoveDescriptor) -> None:
    """Raise MoveError unless ``move`` fits ``t``; terminal depots never move."""
    n = len(t)
    i, j = move.i, move.j
    if move.kind is MoveKind.TWO_OPT:
        if not 1 <= i < j <= n - 2:
            raise MoveError(f"2-opt needs 1 <= i < j <= {n - 2}, got i={i}, j={j}")
    elif move.kind is MoveKind.TWO_STRING:
        if move.x < 0 or move.y < 0:
            raise MoveError(f"2-string block lengths must be non-negative, got X={move.x}, Y={move.y}")
        if not (i >= 1 and j >= i + move.x and j + move.y <= n - 1):
            raise MoveError(
                f"2-string needs i >= 1, j >= i + X, j + Y <= {n - 1}; got i={i}, j={j}, X={move.x}, Y={move.y}"
            )
    elif move.kind is MoveKind.AFS_REALLOC_1:
        if not 1 <= i <= n - 2:
            raise MoveError(f"AFS position {i} is not interior")
        if move.afs is None or move.edge is None:
            raise MoveError("AFS reallocation needs an afs and an edge")
        a, b = move.edge
        if not 0 <= a < b <= n - 1 or i in (a, b):
            raise MoveError(f"edge {move.edge} invalid for removal at {i}")
        if not (b - a == 1 or (b - a == 2 and a + 1 == i)):
            raise MoveError(f"edge {move.edge} is not adjacent after removing position {i}")
    else:
        raise MoveError(f"{move.kind.value} has no constant-time cost update")


def _junctions(inst: Instance, pieces: Sequence[Optional[Tuple[NodeId, NodeId]]]) -> float:
    """Sum of edges joining consecutive non-empty (first, last) pieces."""
    total = 0.0
    last = None
    for piece in pieces:
        if piece is None:
            continue
        if last is not None:
            total += inst.distance(last, piece[0])
        last = piece[1]
    return total


def _block(t: Sequence[NodeId], start: int, length: int) -> Optional[Tuple[NodeId, NodeId]]:
    return (t[start], t[start + length - 1]) if length > 0 else None


def delta_weight(
    inst: Instance,
    t: Sequence[NodeId],
    move: MoveDescriptor,
    budget: Optional[EvalBudget] = None,
) -> float:
    """
    ``w(t') - w(t)`` for the tour the move would produce.

    Only the edges the move breaks and creates are touched. Free against the
    budget unless the budget counts deltas.
    """
    check_move(t, move)
    if budget is not None:
        budget.charge_delta()
    d = inst.distance
    i, j = move.i, move.j
    if move.kind is MoveKind.TWO_OPT:
        a, b, c, e = t[i - 1], t[i], t[j], t[j + 1]
        return d(a, c) + d(b, e) - d(a, b) - d(c, e)
    if move.kind is MoveKind.TWO_STRING:
        x, y = move.x, move.y
        prev = (t[i - 1], t[i - 1])
        nxt = (t[j + y], t[j + y])
        block_a = _block(t, i, x)
        middle = _block(t, i + x, j - i - x)
        block_b = _block(t, j, y)
        before = _junctions(inst, [prev, block_a, middle, block_b, nxt])
        after = _junctions(inst, [prev, block_b, middle, block_a, nxt])
        return after - before
    # AFS_REALLOC_1
    u, s, v = t[i - 1], t[i], t[i + 1]
    a, b = t[move.edge[0]], t[move.edge[1]]
    removed = d(u, s) + d(s, v) - d(u, v)
    inserted = d(a, move.afs) + d(move.afs, b) - d(a, b)
    return inserted - removed


def subtour_spans(t: Sequence[NodeId], depot: Optional[NodeId] = None) -> List[Tuple[int, int]]:
    """(start, end) positions of consecutive depot visits; the depot defaults to t[0]."""
    if not t:
        return []
    depot = t[0] if depot is None else depot
    depots = [k for k, node in enumerate(t) if node == depot]
    return list(zip(depots, depots[1:]))


def subtours(t: Sequence[NodeId], depot: Optional[NodeId] = None) -> List[Tour]:
    """Split ``t`` at every depot visit; each part starts and ends at the depot."""
    return [list(t[a:b + 1]) for a, b in subtour_spans(t, depot)]


def join_subtours(parts: Sequence[Sequence[NodeId]]) -> Tour:
    """Concatenate subtours, merging the shared depot visits."""
    if not parts:
        raise ValueError("cannot join an empty list of subtours")
    joined = list(parts[0])
    for part in parts[1:]:
        joined.extend(part[1:])
    return joined


def format_solution(t: Sequence[NodeId], weight: float) -> str:
    """Two lines: 0-based node ids, then the weight with two decimals."""
    return " ".join(str(node) for node in t) + f"\n{weight:.2f}\n"


def write_solution(path: Union[str, Path], t: Sequence[NodeId], weight: float) -> Path:
    path = Path(path)
    path.write_text(format_solution(t, weight))
    return path


def parse_solution(text: str) -> Tuple[Tour, Optional[float]]:
    """Parse solution text into (tour, claimed weight or None)."""
    lines = [line.strip() for line in text.splitlines() if line.strip()]
    if not lines:
        raise SolutionFormatError("solution file is empty")
    try:
        tour = [int(token) for token in lines[0].replace(",", " ").split()]
    except ValueError as e:
        raise SolutionFormatError(f"tour line must hold integer node ids: {e}") from None
    claimed = None
    if len(lines) > 1:
        try:
            claimed = float(lines[1])
        except ValueError:
            raise SolutionFormatError(f"weight line is not a number: {lines[1]!r}") from None
    return tour, claimed


def read_solution(path: Union[str, Path]) -> Tuple[Tour, Optional[float]]:
    return parse_solution(Path(path).read_text())
