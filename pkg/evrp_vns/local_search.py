"""
Randomized Variable Neighborhood Descent and its operators.

Permutation neighborhoods (2-opt and the 2-string family) are scanned with
numpy: every move's weight delta is computed at once, improving moves are
ordered by delta (ties by position, i before j) and the best one whose
touched subtours stay feasible is applied. Terminal depots never move;
interior depots and AFSs move like any other node, which is how subtours
merge and split.
"""

import logging
import random
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .core import EPS, EvalBudget, MoveDescriptor, MoveKind, Tour, check_move, span_feasible, subtour_spans, tour_weight
from .errors import BudgetExhausted, RepairError
from .instance import Instance, NodeId, NodeKind
from .repair import relaxed_zga

logger = logging.getLogger(__name__)

# (X, Y) block lengths per 2-string neighborhood, complements included.
TWO_STRING_VARIANTS: Dict[str, Tuple[Tuple[int, int], ...]] = {
    "1-point": ((0, 1), (1, 0)),
    "2-point": ((1, 1),),
    "3-point": ((1, 2), (2, 1)),
    "or-opt2": ((0, 2), (2, 0)),
    "or-opt3": ((0, 3), (3, 0)),
    "or-opt4": ((0, 4), (4, 0)),
    "or-opt5": ((0, 5), (5, 0)),
}
PERMUTATION_NEIGHBORHOODS = ("2-opt",) + tuple(TWO_STRING_VARIANTS)
AFS_NEIGHBORHOODS = ("afs-realloc-1", "afs-realloc-more", "afs-realloc-all")


@dataclass(frozen=True)
class NeighborhoodSet:
    """
    Enabled RVND neighborhoods.

    Permutation neighborhoods are always on; the three flags gate the AFS
    operators in the order of the ``ls`` bit string (realloc-1, realloc-more,
    realloc-all).
    """

    realloc_one: bool = True
    realloc_more: bool = True
    realloc_all: bool = False

    @classmethod
    def from_bits(cls, bits: str) -> "NeighborhoodSet":
        bits = bits.strip()
        if len(bits) != 3 or set(bits) - {"0", "1"}:
            raise ValueError(f"ls flags must be three 0/1 digits, got {bits!r}")
        return cls(*(b == "1" for b in bits))

    @property
    def bits(self) -> str:
        return "".join("1" if flag else "0" for flag in (self.realloc_one, self.realloc_more, self.realloc_all))

    @property
    def enabled(self) -> Tuple[str, ...]:
        flags = (self.realloc_one, self.realloc_more, self.realloc_all)
        return PERMUTATION_NEIGHBORHOODS + tuple(name for name, on in zip(AFS_NEIGHBORHOODS, flags) if on)


def apply_two_opt(t: Sequence[NodeId], i: int, j: int) -> Tour:
    """Reverse positions ``i..j`` inclusive."""
    check_move(t, MoveDescriptor(MoveKind.TWO_OPT, i, j))
    return list(t[:i]) + list(t[i:j + 1])[::-1] + list(t[j + 1:])


def apply_two_string(t: Sequence[NodeId], i: int, j: int, x: int, y: int) -> Tour:
    """Exchange the ``x`` nodes starting at ``i`` with the ``y`` nodes starting at ``j``."""
    check_move(t, MoveDescriptor(MoveKind.TWO_STRING, i, j, x, y))
    return list(t[:i]) + list(t[j:j + y]) + list(t[i + x:j]) + list(t[i:i + x]) + list(t[j + y:])


def apply_afs_realloc(t: Sequence[NodeId], move: MoveDescriptor) -> Tour:
    """Drop the AFS at ``move.i`` and insert ``move.afs`` on ``move.edge``."""
    check_move(t, move)
    after = move.edge[0]
    out: Tour = []
    for k, node in enumerate(t):
        if k == move.i:
            continue
        out.append(node)
        if k == after:
            out.append(move.afs)
    return out


class _DepotIndex:
    """Nearest depot position at or before / at or after each tour position."""

    def __init__(self, inst: Instance, t: Sequence[NodeId]):
        n = len(t)
        self.prev = [0] * n
        self.next = [n - 1] * n
        last = 0
        for k, node in enumerate(t):
            if node == inst.depot:
                last = k
            self.prev[k] = last
        last = n - 1
        for k in range(n - 1, -1, -1):
            if t[k] == inst.depot:
                last = k
            self.next[k] = last


def _window_feasible(
    inst: Instance, t: Sequence[NodeId], depots: _DepotIndex, lo: int, hi: int, segment: List[NodeId]
) -> bool:
    """Feasibility of the subtours touched when positions ``lo..hi`` become ``segment``."""
    start, stop = depots.prev[lo - 1], depots.next[hi + 1]
    window = list(t[start:lo]) + segment + list(t[hi + 1:stop + 1])
    return span_feasible(inst, window, 0, len(window) - 1)


def _charge_scan(budget: Optional[EvalBudget], count: int) -> None:
    if budget is not None and count:
        budget.charge_delta(count)


def _ranked(deltas: np.ndarray) -> Iterator[int]:
    """Indices of improving deltas, best first; ties keep scan order."""
    improving = np.flatnonzero(deltas < -EPS)
    if len(improving) == 0:
        return iter(())
    order = np.argsort(deltas[improving], kind="stable")
    return iter(improving[order].tolist())


def two_opt_deltas(inst: Instance, t: Sequence[NodeId]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Every 2-opt move as (i, j, delta) arrays in lexicographic (i, j) order."""
    nodes = np.asarray(t)
    n = len(nodes)
    if n < 4:
        empty = np.zeros(0, dtype=int)
        return empty, empty, np.zeros(0)
    rows, cols = np.triu_indices(n - 2, k=1)
    i, j = rows + 1, cols + 1
    d = inst.pair_distances
    edge = d(nodes[:-1], nodes[1:])
    delta = d(nodes[i - 1], nodes[j]) + d(nodes[i], nodes[j + 1]) - edge[i - 1] - edge[j]
    return i, j, delta


def two_string_deltas(
    inst: Instance, t: Sequence[NodeId], x: int, y: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Every 2-string move with block lengths (x, y) as (i, j, delta) arrays."""
    nodes = np.asarray(t)
    n = len(nodes)
    grid_i = np.arange(1, n)[:, None]
    grid_j = np.arange(1, n)[None, :]
    valid = (grid_j >= grid_i + x) & (grid_j + y <= n - 1)
    if x == 0 or y == 0:
        # one empty block plus an empty middle leaves the tour unchanged
        valid &= grid_j > grid_i + x
    rows, cols = np.nonzero(valid)
    i, j = rows + 1, cols + 1
    if len(i) == 0:
        return i, j, np.zeros(0)

    d = inst.pair_distances
    p, q = nodes[i - 1], nodes[j + y]
    has_middle = j > i + x
    m_first = nodes[np.where(has_middle, i + x, 0)]
    m_last = nodes[np.where(has_middle, j - 1, 0)]
    if x > 0 and y > 0:
        a_first, a_last = nodes[i], nodes[i + x - 1]
        b_first, b_last = nodes[j], nodes[j + y - 1]
        spread = (
            d(p, b_first) + d(b_last, m_first) + d(m_last, a_first) + d(a_last, q)
            - d(p, a_first) - d(a_last, m_first) - d(m_last, b_first) - d(b_last, q)
        )
        adjacent = (
            d(p, b_first) + d(b_last, a_first) + d(a_last, q)
            - d(p, a_first) - d(a_last, b_first) - d(b_last, q)
        )
        delta = np.where(has_middle, spread, adjacent)
    elif x == 0:
        b_first, b_last = nodes[j], nodes[j + y - 1]
        delta = (
            d(p, b_first) + d(b_last, m_first) + d(m_last, q)
            - d(p, m_first) - d(m_last, b_first) - d(b_last, q)
        )
    else:
        a_first, a_last = nodes[i], nodes[i + x - 1]
        delta = (
            d(p, m_first) + d(m_last, a_first) + d(a_last, q)
            - d(p, a_first) - d(a_last, m_first) - d(m_last, q)
        )
    return i, j, delta


def two_opt_step(inst: Instance, t: Sequence[NodeId], budget: Optional[EvalBudget] = None) -> Optional[Tour]:
    """Apply the best feasible improving 2-opt move, or return None."""
    i, j, delta = two_opt_deltas(inst, t)
    _charge_scan(budget, len(delta))
    depots = None
    for k in _ranked(delta):
        lo, hi = int(i[k]), int(j[k])
        segment = list(t[lo:hi + 1])[::-1]
        depots = depots or _DepotIndex(inst, t)
        if _window_feasible(inst, t, depots, lo, hi, segment):
            return list(t[:lo]) + segment + list(t[hi + 1:])
    return None


def two_string_step(
    inst: Instance,
    t: Sequence[NodeId],
    variants: Sequence[Tuple[int, int]],
    budget: Optional[EvalBudget] = None,
) -> Optional[Tour]:
    """Apply the best feasible improving move over the given (X, Y) variants, or return None."""
    scans = [two_string_deltas(inst, t, x, y) for x, y in variants]
    sizes = [len(delta) for _, _, delta in scans]
    if not sum(sizes):
        return None
    # move k belongs to variant variant_of[k] and sits at (starts[k], ends[k])
    variant_of = np.repeat(np.arange(len(variants)), sizes)
    starts = np.concatenate([i for i, _, _ in scans])
    ends = np.concatenate([j for _, j, _ in scans])
    delta = np.concatenate([d for _, _, d in scans])
    _charge_scan(budget, len(delta))
    depots = None
    for k in _ranked(delta):
        x, y = variants[int(variant_of[k])]
        i, j = int(starts[k]), int(ends[k])
        segment = list(t[j:j + y]) + list(t[i + x:j]) + list(t[i:i + x])
        depots = depots or _DepotIndex(inst, t)
        if _window_feasible(inst, t, depots, i, j + y - 1, segment):
            return list(t[:i]) + segment + list(t[j + y:])
    return None


def _afs_positions(inst: Instance, t: Sequence[NodeId], start: int, stop: int) -> List[int]:
    return [k for k in range(start + 1, stop) if inst.kinds[t[k]] is NodeKind.AFS]


def _best_single_afs_move(
    inst: Instance, t: Sequence[NodeId], start: int, stop: int, afs_pos: int, budget: Optional[EvalBudget]
) -> Optional[Tuple[float, MoveDescriptor]]:
    """
    Cheapest feasible placement of one AFS in the subtour ``t[start..stop]``.

    With the current AFS removed, ``ahead[k]`` is the charge left on reaching
    stripped position k from the depot and ``needed[k]`` the energy to finish
    from there. Inserting C on edge (k, k+1) is feasible iff the vehicle
    reaches C from k and, recharged, gets from C back to the depot.
    """
    h, battery = inst.consumption_rate, inst.battery_capacity
    positions = [k for k in range(start, stop + 1) if k != afs_pos]
    stripped = np.asarray([t[k] for k in positions])
    stations = np.asarray(inst.stations)
    d = inst.pair_distances

    legs = h * d(stripped[:-1], stripped[1:])
    ahead = battery - np.concatenate(([0.0], np.cumsum(legs)))
    # once the charge runs out, nothing further along is reachable
    ahead[np.logical_or.accumulate(ahead < -EPS)] = -np.inf
    needed = np.concatenate((np.cumsum(legs[::-1])[::-1], [0.0]))

    left, right = stripped[:-1, None], stripped[1:, None]
    to_station = h * d(left, stations[None, :])
    from_station = h * d(stations[None, :], right)
    feasible = (ahead[:-1, None] - to_station >= -EPS) & (battery - from_station - needed[1:, None] >= -EPS)
    cost = (to_station + from_station) / h - d(stripped[:-1], stripped[1:])[:, None]
    _charge_scan(budget, cost.size)

    cost = np.where(feasible, cost, np.inf)
    best = int(np.argmin(cost))
    edge, station = divmod(best, len(stations))
    new_cost = float(cost[edge, station])
    if not np.isfinite(new_cost):
        return None

    u, s, v = t[afs_pos - 1], t[afs_pos], t[afs_pos + 1]
    old_cost = inst.distance(u, s) + inst.distance(s, v) - inst.distance(u, v)
    gain = old_cost - new_cost
    if gain <= EPS:
        return None
    move = MoveDescriptor(
        MoveKind.AFS_REALLOC_1, afs_pos,
        afs=int(stations[station]), edge=(positions[edge], positions[edge + 1]),
    )
    return gain, move


def afs_realloc_1(inst: Instance, t: Sequence[NodeId], budget: Optional[EvalBudget] = None) -> Tour:
    """
    Move the AFS of every single-AFS subtour to its cheapest feasible
    placement, unused stations included. Customer order is untouched.
    """
    if not inst.stations:
        return list(t)
    moves: List[MoveDescriptor] = []
    for start, stop in subtour_spans(t, inst.depot):
        afs = _afs_positions(inst, t, start, stop)
        if len(afs) != 1:
            continue
        found = _best_single_afs_move(inst, t, start, stop, afs[0], budget)
        if found is not None:
            moves.append(found[1])

    out = list(t)
    # apply right to left so earlier positions stay valid
    for move in reversed(moves):
        out = apply_afs_realloc(out, move)
    return out


def _strip_afs(inst: Instance, part: Sequence[NodeId]) -> Tour:
    return [node for node in part if inst.kinds[node] is not NodeKind.AFS]


def afs_realloc_more(inst: Instance, t: Sequence[NodeId], budget: Optional[EvalBudget] = None) -> Tour:
    """
    Re-place the AFSs of every subtour that visits more than one.

    The AFSs are stripped and reinserted by Relaxed ZGA, once forwards and once
    on the reversed subtour; the lighter repair replaces the subtour only if it
    is strictly lighter than the current one. Costs two evaluations per
    such subtour. A subtour whose repair fails is kept as is.
    """
    parts: List[Tour] = []
    for start, stop in subtour_spans(t, inst.depot):
        part = list(t[start:stop + 1])
        if len(_afs_positions(inst, t, start, stop)) <= 1:
            parts.append(part)
            continue
        stripped = _strip_afs(inst, part)
        try:
            forward = relaxed_zga(inst, stripped).tour
            backward = relaxed_zga(inst, stripped[::-1]).tour
        except RepairError as e:
            logger.debug("AFS reallocation skipped a subtour: %s", e)
            parts.append(part)
            continue
        w_forward = tour_weight(inst, forward, budget)
        w_backward = tour_weight(inst, backward, budget)
        w_part = tour_weight(inst, part)
        if w_forward < w_backward and w_forward < w_part:
            parts.append(forward)
        elif w_backward < w_part:
            parts.append(backward)
        else:
            parts.append(part)

    out: Tour = [t[0]]
    for part in parts:
        out.extend(part[1:])
    return out


def afs_realloc_all(inst: Instance, t: Sequence[NodeId], budget: Optional[EvalBudget] = None) -> Tour:
    """AFS-realloc-1, followed by AFS-realloc-more only when the former changed nothing."""
    out = afs_realloc_1(inst, t, budget)
    if out == list(t):
        out = afs_realloc_more(inst, t, budget)
    return out


def _as_step(operator: Callable[[Instance, Sequence[NodeId], Optional[EvalBudget]], Tour]):
    def step(inst: Instance, t: Sequence[NodeId], budget: Optional[EvalBudget]) -> Optional[Tour]:
        out = operator(inst, t, budget)
        if tour_weight(inst, out) < tour_weight(inst, t) - EPS:
            return out
        return None

    return step


def _two_string_step(variants: Sequence[Tuple[int, int]]):
    def step(inst: Instance, t: Sequence[NodeId], budget: Optional[EvalBudget]) -> Optional[Tour]:
        return two_string_step(inst, t, variants, budget)

    return step


NEIGHBORHOODS: Dict[str, Callable[[Instance, Sequence[NodeId], Optional[EvalBudget]], Optional[Tour]]] = {
    "2-opt": two_opt_step,
    **{name: _two_string_step(variants) for name, variants in TWO_STRING_VARIANTS.items()},
    "afs-realloc-1": _as_step(afs_realloc_1),
    "afs-realloc-more": _as_step(afs_realloc_more),
    "afs-realloc-all": _as_step(afs_realloc_all),
}


def rvnd(
    inst: Instance,
    t: Sequence[NodeId],
    nbhd: NeighborhoodSet,
    rng: random.Random,
    budget: Optional[EvalBudget] = None,
) -> Tour:
    """
    Randomized Variable Neighborhood Descent with best improvement.

    Neighborhoods are tried in a shuffled order; after any improvement the
    order is reshuffled and the search restarts from the first one. Stops at
    a local optimum of every enabled neighborhood or when the budget runs out.

    Args:
        inst: The instance
        t: A valid tour
        nbhd: Enabled neighborhoods
        rng: Source of the shuffles
        budget: Counts AFS-realloc-more evaluations (and deltas if configured)

    Returns:
        A valid tour no heavier than ``t``
    """
    current = list(t)
    order = list(nbhd.enabled)
    rng.shuffle(order)
    k = 0
    try:
        while k < len(order):
            if budget is not None and budget.exhausted:
                break
            improved = NEIGHBORHOODS[order[k]](inst, current, budget)
            if improved is None:
                k += 1
                continue
            current = improved
            rng.shuffle(order)
            k = 0
    except BudgetExhausted:
        logger.debug("Budget exhausted inside local search")
    return current
