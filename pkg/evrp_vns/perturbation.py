"""Generalized double-bridge perturbation."""

import random
from dataclasses import dataclass
from typing import List, Sequence

from .core import Tour
from .instance import Instance, NodeId
from .repair import relaxed_zga


@dataclass(frozen=True)
class PerturbParams:
    p: int = 2

    def __post_init__(self):
        if self.p < 1:
            raise ValueError(f"perturbation strength must be at least 1, got {self.p}")


def cut_segments(t: Sequence[NodeId], cuts: Sequence[int]) -> List[List[NodeId]]:
    """Split the interior of ``t`` at sorted cut positions into len(cuts) + 1 segments."""
    bounds = [1] + list(cuts) + [len(t) - 1]
    return [list(t[a:b]) for a, b in zip(bounds, bounds[1:])]


def double_bridge(inst: Instance, t: Sequence[NodeId], p: int, rng: random.Random) -> Tour:
    """
    Cut the interior at ``p`` random positions, shuffle the ``p + 1`` segments,
    reverse each with probability 1/2, reconnect between the terminal depots
    and repair with Relaxed ZGA.

    Interior depots and AFSs stay in their segments; the repair removes
    nothing, so every customer is still visited exactly once.

    Raises:
        RepairError: If the reconnected sequence cannot be repaired
    """
    PerturbParams(p)
    n = len(t)
    if n <= 3:
        return list(t)
    # cuts fall in 2..n-2 so that no segment is empty
    p = min(p, n - 3)
    cuts = sorted(rng.sample(range(2, n - 1), p))
    segments = cut_segments(t, cuts)
    rng.shuffle(segments)
    for segment in segments:
        if rng.random() < 0.5:
            segment.reverse()

    sequence: Tour = [t[0]]
    for segment in segments:
        sequence.extend(segment)
    sequence.append(t[-1])
    return relaxed_zga(inst, sequence).tour
