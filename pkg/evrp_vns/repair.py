"""
Relaxed ZGA repair: one left-to-right pass that turns any depot-anchored node
sequence into a valid EVRP tour by inserting depot and AFS visits.

The depot counts as a recharge point everywhere: it is considered when
checking whether a recharge point is still reachable after serving a node and
when picking the recharge point to detour to.
"""

from collections import deque
from dataclasses import dataclass
from typing import Optional, Sequence

from .core import Tour, validate
from .errors import RepairError
from .instance import Instance, NodeId, NodeKind


@dataclass
class RepairOutcome:
    tour: Tour
    inserted_afs: int = 0
    inserted_depots: int = 0


def closest_reachable_recharge(inst: Instance, current: NodeId, target: NodeId, charge: float) -> Optional[NodeId]:
    """
    Recharge point other than ``current`` closest to ``target`` that
    ``current`` can reach on ``charge``.

    Ties go to the lowest node id. Returns None when nothing is reachable.
    """
    h = inst.consumption_rate
    best, best_dist = None, 0.0
    for q in inst.recharge_points:
        if q == current:
            continue
        if charge - h * inst.distance(current, q) < 0:
            continue
        dist = inst.distance(q, target)
        if best is None or dist < best_dist:
            best, best_dist = q, dist
    return best


def relaxed_zga(inst: Instance, t: Sequence[NodeId]) -> RepairOutcome:
    """
    Repair ``t`` into a valid tour without reordering its customers.

    For each pending node: if the remaining cargo cannot cover it, go to the
    depot first; else if, after serving it, some recharge point is still
    reachable, append it; else detour to the recharge point closest to it
    among those reachable from the current node.

    Args:
        inst: The instance
        t: Node sequence starting and ending at the depot

    Returns:
        RepairOutcome with the repaired tour and insertion counts

    Raises:
        RepairError: If no recharge point is reachable from the current node
    """
    if not t or t[0] != inst.depot or t[-1] != inst.depot:
        raise ValueError("relaxed_zga needs a sequence that starts and ends at the depot")

    h = inst.consumption_rate
    capacity, battery = inst.cargo_capacity, inst.battery_capacity
    kinds, demands, nearest = inst.kinds, inst.demands, inst.nearest_recharge
    depot = inst.depot

    out: Tour = [depot]
    current = depot
    load, charge = capacity, battery
    pending = deque(t[1:])
    inserted_afs = inserted_depots = 0
    # Detours inserted since the last customer. A capacity trip needs at most
    # one chain of recharge points to the depot and one back out.
    detours = 0
    max_detours = 2 * len(inst.recharge_points)

    while pending:
        nxt = pending[0]
        kind = kinds[nxt]

        if kind is NodeKind.CUSTOMER and load < demands[nxt]:
            pending.appendleft(depot)
            inserted_depots += 1
            continue

        if kind is not NodeKind.CUSTOMER and nxt == current:
            # Zero-length revisit of the recharge point we stand on.
            pending.popleft()
            continue

        after = charge - h * inst.distance(current, nxt)
        if after >= 0 and (kind is not NodeKind.CUSTOMER or h * nearest[nxt] <= after):
            out.append(nxt)
            pending.popleft()
            current = nxt
            if kind is NodeKind.CUSTOMER:
                load -= demands[nxt]
                charge = after
                detours = 0
            else:
                charge = battery
                if kind is NodeKind.DEPOT:
                    load = capacity
            continue

        q = closest_reachable_recharge(inst, current, nxt, charge)
        if q is None:
            raise RepairError(f"no recharge point reachable from node {current} towards node {nxt}", len(out) - 1)
        detours += 1
        if detours > max_detours:
            raise RepairError(f"recharge detours towards node {nxt} do not reach it", len(out) - 1)
        pending.appendleft(q)
        if q == depot:
            inserted_depots += 1
        else:
            inserted_afs += 1

    if out[-1] != depot:
        out.append(depot)

    report = validate(inst, out, check_coverage=False)
    if not report.valid:
        first = report.violations[0]
        raise RepairError(f"repaired tour still violates {first.kind.value}: {first.detail}", first.position or 0)
    return RepairOutcome(out, inserted_afs, inserted_depots)
