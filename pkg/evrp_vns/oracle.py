"""
Exhaustive solver and fixture generator for tiny instances.

exact_solve prices every capacity-feasible customer subset as one round trip
(best customer order, best recharge stops per leg), then combines subsets
with a set-partition DP. Each leg between consecutive customers may stop at
up to two stations; with every customer within half a reach of a recharge
point this bounds the search, and it is the only incompleteness of the
oracle.
"""

import logging
import math
import random
from dataclasses import dataclass
from itertools import permutations
from typing import Dict, List, Optional, Sequence, Tuple

from .core import EPS, Tour, tour_weight, validate
from .errors import OracleLimitError, SolverError
from .instance import Instance, NodeId, make_instance

logger = logging.getLogger(__name__)

MAX_STOPS_PER_LEG = 2

# (cost so far, energy used since the last recharge, path without the start)
Label = Tuple[float, float, Tuple[NodeId, ...]]


@dataclass(frozen=True)
class TinyInstanceLimit:
    max_customers: int = 8
    max_afs: int = 3

    def check(self, inst: Instance) -> None:
        if len(inst.customers) > self.max_customers or len(inst.stations) > self.max_afs:
            raise OracleLimitError(
                f"{inst.name} has {len(inst.customers)} customers and {len(inst.stations)} stations; "
                f"exhaustive search allows at most {self.max_customers} and {self.max_afs}"
            )


@dataclass(frozen=True)
class GeometryParams:
    """
    Layout of generated fixtures: a square of side ``area`` with the depot in
    the middle, stations within ``afs_radius`` reaches of the depot, and
    customers within ``customer_radius`` reaches of some recharge point.
    """

    area: float = 100.0
    battery_capacity: float = 60.0
    consumption_rate: float = 1.0
    cargo_capacity: int = 10
    max_demand: int = 4
    afs_radius: float = 0.5
    customer_radius: float = 0.45

    def __post_init__(self):
        if not 0 < self.customer_radius < 0.5:
            raise ValueError("customer_radius must lie in (0, 0.5) so every customer can be served")
        if not 0 < self.afs_radius <= 0.5:
            raise ValueError("afs_radius must lie in (0, 0.5] so every station can reach every other")
        if not 1 <= self.max_demand <= self.cargo_capacity:
            raise ValueError("max_demand must lie in 1..cargo_capacity")


def _leg_labels(inst: Instance, labels: List[Label], target: NodeId) -> List[Label]:
    """Extend every label to ``target`` directly or through up to two stations; keep the Pareto front."""
    d = inst.distance
    reach = inst.reach
    out: List[Label] = []
    for cost, used, path in labels:
        here = path[-1] if path else inst.depot
        frontier = [(cost, used, path, here, 0)]
        while frontier:
            c, u, p, at, stops = frontier.pop()
            leg = d(at, target)
            if u + leg <= reach + EPS:
                out.append((c + leg, u + leg, p + (target,)))
            if stops == MAX_STOPS_PER_LEG:
                continue
            for s in inst.stations:
                if s == at:
                    continue
                hop = d(at, s)
                if u + hop <= reach + EPS:
                    frontier.append((c + hop, 0.0, p + (s,), s, stops + 1))

    out.sort(key=lambda label: (label[0], label[1]))
    front: List[Label] = []
    best_used = math.inf
    for label in out:
        if label[1] < best_used - EPS:
            front.append(label)
            best_used = label[1]
    return front


def route_cost(inst: Instance, order: Sequence[NodeId]) -> Tuple[float, Optional[Tour]]:
    """Cheapest round trip visiting ``order`` with optimal station stops; (inf, None) if none exists."""
    labels: List[Label] = [(0.0, 0.0, ())]
    for target in list(order) + [inst.depot]:
        labels = _leg_labels(inst, labels, target)
        if not labels:
            return math.inf, None
    cost, _, path = labels[0]
    return cost, [inst.depot] + list(path)


def exact_solve(inst: Instance, limit: TinyInstanceLimit = TinyInstanceLimit()) -> Tuple[float, Tour]:
    """
    Optimal tour of a tiny instance.

    Returns:
        (optimal_weight, optimal_tour)

    Raises:
        OracleLimitError: If the instance exceeds ``limit``
        SolverError: If no valid tour exists within two stops per leg
    """
    limit.check(inst)
    customers = list(inst.customers)
    k = len(customers)
    if k == 0:
        return 0.0, [inst.depot, inst.depot]

    demand = [0.0] * (1 << k)
    for mask in range(1, 1 << k):
        low = (mask & -mask).bit_length() - 1
        demand[mask] = demand[mask & (mask - 1)] + inst.demands[customers[low]]

    routes: Dict[int, Tuple[float, Tour]] = {}
    for mask in range(1, 1 << k):
        if demand[mask] > inst.cargo_capacity + EPS:
            continue
        members = [customers[b] for b in range(k) if mask >> b & 1]
        best: Tuple[float, Optional[Tour]] = (math.inf, None)
        for order in permutations(members):
            # a route and its reverse cost the same
            if len(order) > 1 and order[0] > order[-1]:
                continue
            cost, tour = route_cost(inst, order)
            if cost < best[0] - EPS:
                best = (cost, tour)
        if best[1] is not None:
            routes[mask] = best

    full = (1 << k) - 1
    total = [math.inf] * (1 << k)
    choice = [0] * (1 << k)
    total[0] = 0.0
    for mask in range(1, full + 1):
        low = mask & -mask
        rest = mask ^ low
        sub = rest
        while True:
            part = sub | low
            if part in routes:
                cost = routes[part][0] + total[mask ^ part]
                if cost < total[mask] - EPS:
                    total[mask], choice[mask] = cost, part
            if sub == 0:
                break
            sub = (sub - 1) & rest

    if math.isinf(total[full]):
        raise SolverError(f"{inst.name}: no valid tour with at most {MAX_STOPS_PER_LEG} stops per leg")

    tour: Tour = [inst.depot]
    mask = full
    while mask:
        part = choice[mask]
        tour.extend(routes[part][1][1:])
        mask ^= part

    report = validate(inst, tour)
    if not report.valid:
        raise SolverError(f"{inst.name}: exhaustive search built an invalid tour:\n{report.summary()}")
    weight = tour_weight(inst, tour)
    logger.debug("Exact optimum of %s: %.4f over %d feasible routes", inst.name, weight, len(routes))
    return weight, tour


def _around(rng: random.Random, centre: Tuple[float, float], radius: float, area: float) -> Tuple[float, float]:
    angle = rng.uniform(0.0, 2.0 * math.pi)
    r = radius * math.sqrt(rng.random())
    x = min(max(centre[0] + r * math.cos(angle), 0.0), area)
    y = min(max(centre[1] + r * math.sin(angle), 0.0), area)
    return round(x, 2), round(y, 2)


def gen_fixture(
    rng: random.Random,
    n_customers: int,
    n_afs: int,
    geometry: GeometryParams = GeometryParams(),
    name: Optional[str] = None,
) -> Instance:
    """
    Random instance where every customer lies within half a reach of some
    recharge point. The same ``rng`` state always yields the same instance.
    """
    if n_customers < 1 or n_afs < 0:
        raise ValueError(f"need at least one customer and no negative station count, got {n_customers}, {n_afs}")
    reach = geometry.battery_capacity / geometry.consumption_rate
    depot = (geometry.area / 2.0, geometry.area / 2.0)
    # 0.01 of room so coordinate rounding cannot push two stations out of reach
    stations = [_around(rng, depot, geometry.afs_radius * reach - 0.01, geometry.area) for _ in range(n_afs)]
    anchors = [depot] + stations
    customers = []
    for _ in range(n_customers):
        x, y = _around(rng, rng.choice(anchors), geometry.customer_radius * reach, geometry.area)
        customers.append((x, y, rng.randint(1, geometry.max_demand)))
    return make_instance(
        name or f"fixture-n{n_customers}-s{n_afs}",
        depot,
        customers,
        stations,
        geometry.cargo_capacity,
        geometry.battery_capacity,
        geometry.consumption_rate,
    )
