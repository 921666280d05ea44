"""
EVRP instance model and competition-format reader/writer.

An instance file is a TSPLIB-like text file: ``KEY: value`` header lines
followed by NODE_COORD_SECTION, DEMAND_SECTION, STATIONS_COORD_SECTION and
DEPOT_SECTION, terminated by EOF. Node ids in the file are 1-based; inside
the package every node is addressed by its 0-based position in file order.

Distances are exact double-precision Euclidean distances, never rounded.
Published scores carry two decimals and were produced without rounding; any
change of this convention invalidates the golden scores in the test suite.
"""

import io
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import IO, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import InstanceFormatError

logger = logging.getLogger(__name__)

NodeId = int

# Full distance matrix up to this many nodes, on-demand computation above.
MATRIX_NODE_LIMIT = 1500


HEADER_KEYS = {
    "NAME",
    "COMMENT",
    "TYPE",
    "OPTIMAL_VALUE",
    "VEHICLES",
    "DIMENSION",
    "STATIONS",
    "CAPACITY",
    "ENERGY_CAPACITY",
    "ENERGY_CONSUMPTION",
    "EDGE_WEIGHT_TYPE",
    "EDGE_WEIGHT_FORMAT",
}
SECTIONS = {
    "NODE_COORD_SECTION",
    "DEMAND_SECTION",
    "STATIONS_COORD_SECTION",
    "DEPOT_SECTION",
}


class NodeKind(Enum):
    DEPOT = "depot"
    CUSTOMER = "customer"
    AFS = "afs"


@dataclass(frozen=True)
class Instance:
    """
    Immutable EVRP problem data.

    Per-node tuples (kinds, coords, demands) are indexed by NodeId. Derived
    lookups (distance rows, nearest recharge distances) are built once in
    ``__post_init__`` and excluded from equality.
    """

    name: str
    kinds: Tuple[NodeKind, ...]
    coords: Tuple[Tuple[float, float], ...]
    demands: Tuple[float, ...]
    cargo_capacity: float
    battery_capacity: float
    consumption_rate: float
    optimal_value: Optional[float] = None
    vehicles: Optional[int] = None

    depot: NodeId = field(init=False, repr=False, compare=False)
    customers: Tuple[NodeId, ...] = field(init=False, repr=False, compare=False)
    stations: Tuple[NodeId, ...] = field(init=False, repr=False, compare=False)
    recharge_points: Tuple[NodeId, ...] = field(init=False, repr=False, compare=False)
    matrix: Optional[np.ndarray] = field(init=False, repr=False, compare=False)
    nearest_recharge: Tuple[float, ...] = field(init=False, repr=False, compare=False)
    _xs: np.ndarray = field(init=False, repr=False, compare=False)
    _ys: np.ndarray = field(init=False, repr=False, compare=False)
    _rows: Optional[List[List[float]]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = len(self.kinds)
        if len(self.coords) != n or len(self.demands) != n:
            raise InstanceFormatError("kinds, coords and demands must have the same length")
        if self.cargo_capacity <= 0:
            raise InstanceFormatError(f"cargo capacity must be positive, got {self.cargo_capacity}")
        if self.battery_capacity <= 0:
            raise InstanceFormatError(f"energy capacity must be positive, got {self.battery_capacity}")
        if self.consumption_rate <= 0:
            raise InstanceFormatError(f"energy consumption must be positive, got {self.consumption_rate}")

        depots = [i for i, kind in enumerate(self.kinds) if kind is NodeKind.DEPOT]
        if len(depots) != 1:
            raise InstanceFormatError(f"exactly one depot required, found {len(depots)}")
        for i, (kind, demand) in enumerate(zip(self.kinds, self.demands)):
            if demand < 0:
                raise InstanceFormatError(f"node {i} has negative demand {demand}")
            if kind is not NodeKind.CUSTOMER and demand != 0:
                raise InstanceFormatError(f"{kind.value} node {i} must have zero demand")
            if demand > self.cargo_capacity:
                raise InstanceFormatError(
                    f"demand exceeds capacity: node {i} demands {demand} > {self.cargo_capacity}"
                )

        stations = tuple(i for i, kind in enumerate(self.kinds) if kind is NodeKind.AFS)
        _set = object.__setattr__
        _set(self, "depot", depots[0])
        _set(self, "customers", tuple(i for i, kind in enumerate(self.kinds) if kind is NodeKind.CUSTOMER))
        _set(self, "stations", stations)
        _set(self, "recharge_points", tuple(sorted((depots[0],) + stations)))

        xs = np.array([c[0] for c in self.coords], dtype=float)
        ys = np.array([c[1] for c in self.coords], dtype=float)
        _set(self, "_xs", xs)
        _set(self, "_ys", ys)
        if n <= MATRIX_NODE_LIMIT:
            dx = xs[:, None] - xs[None, :]
            dy = ys[:, None] - ys[None, :]
            matrix = np.sqrt(dx * dx + dy * dy)
            matrix.setflags(write=False)
            _set(self, "matrix", matrix)
            _set(self, "_rows", matrix.tolist())
        else:
            _set(self, "matrix", None)
            _set(self, "_rows", None)

        points = np.array(self.recharge_points)
        if self.matrix is not None:
            nearest = self.matrix[:, points].min(axis=1)
        else:
            nearest = [self.pair_distances(np.full(len(points), i), points).min() for i in range(n)]
        _set(self, "nearest_recharge", tuple(float(d) for d in nearest))

    @property
    def size(self) -> int:
        """|V|: depot, customers and stations."""
        return len(self.kinds)

    @property
    def reach(self) -> float:
        return self.battery_capacity / self.consumption_rate

    def distance(self, i: NodeId, j: NodeId) -> float:
        if self._rows is not None:
            return self._rows[i][j]
        dx = self.coords[i][0] - self.coords[j][0]
        dy = self.coords[i][1] - self.coords[j][1]
        return math.sqrt(dx * dx + dy * dy)

    def pair_distances(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Element-wise distances between node arrays ``a`` and ``b``."""
        if self.matrix is not None:
            return self.matrix[a, b]
        dx = self._xs[a] - self._xs[b]
        dy = self._ys[a] - self._ys[b]
        return np.sqrt(dx * dx + dy * dy)

    def unreachable_customers(self) -> List[NodeId]:
        """Customers farther than reach/2 from every recharge point."""
        half = self.reach / 2.0
        return [c for c in self.customers if self.nearest_recharge[c] > half]


def distance(inst: Instance, i: NodeId, j: NodeId) -> float:
    """Euclidean distance between nodes ``i`` and ``j``."""
    return inst.distance(i, j)


def reach(inst: Instance) -> float:
    """Distance an EV can drive on a full battery (Q / h)."""
    return inst.reach


def _number(value: str, line_no: int, line: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise InstanceFormatError(f"expected a number, got {value!r}", line_no, line) from None


def _node_id(value: str, total: int, line_no: int, line: str) -> int:
    try:
        node = int(value)
    except ValueError:
        raise InstanceFormatError(f"expected a node id, got {value!r}", line_no, line) from None
    if not 1 <= node <= total:
        raise InstanceFormatError(f"node id {node} outside 1..{total}", line_no, line)
    return node - 1


def _read_text(source: Union[str, bytes, IO]) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, str):
        return source
    data = source.read()
    return data.decode("utf-8") if isinstance(data, bytes) else data


def parse_instance(source: Union[str, bytes, IO], name: Optional[str] = None) -> Instance:
    """
    Parse a competition-format instance.

    Args:
        source: Instance text, raw bytes, or a text/binary stream
        name: Fallback instance name when the file has no NAME header

    Returns:
        The parsed Instance

    Raises:
        InstanceFormatError: On malformed headers, missing sections, unsupported
            edge weight types or demands above the cargo capacity
    """
    text = _read_text(source)
    header: Dict[str, str] = {}
    header_lines: Dict[str, Tuple[int, str]] = {}
    coords: Dict[int, Tuple[float, float]] = {}
    demands: Dict[int, Tuple[float, int, str]] = {}
    station_ids: List[int] = []
    depot_ids: List[int] = []
    seen_sections = set()
    section: Optional[str] = None
    total: Optional[int] = None

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        tokens = line.split(":", 1)[0].split()
        head = tokens[0].upper() if tokens else ""
        if head == "EOF":
            break
        if head in SECTIONS:
            section = head
            seen_sections.add(head)
            if total is None:
                total = _total_nodes(header, header_lines)
            continue
        if ":" in line and line.split(":", 1)[0].strip().upper() in HEADER_KEYS:
            key, value = line.split(":", 1)
            key = key.strip().upper()
            header[key] = value.strip()
            header_lines[key] = (line_no, raw)
            section = None
            continue
        if section is None:
            if ":" in line:
                logger.debug("Ignoring unknown header line %d: %s", line_no, line)
                continue
            raise InstanceFormatError("data line outside of any section", line_no, raw)

        parts = line.split()
        if section == "NODE_COORD_SECTION":
            if len(parts) < 3:
                raise InstanceFormatError("coordinate line needs 'id x y'", line_no, raw)
            node = _node_id(parts[0], total, line_no, raw)
            coords[node] = (_number(parts[1], line_no, raw), _number(parts[2], line_no, raw))
        elif section == "DEMAND_SECTION":
            if len(parts) < 2:
                raise InstanceFormatError("demand line needs 'id demand'", line_no, raw)
            node = _node_id(parts[0], total, line_no, raw)
            demands[node] = (_number(parts[1], line_no, raw), line_no, raw)
        elif section == "STATIONS_COORD_SECTION":
            for part in parts:
                station_ids.append(_node_id(part, total, line_no, raw))
        elif section == "DEPOT_SECTION":
            for part in parts:
                if part.strip() == "-1":
                    section = None
                    break
                depot_ids.append(_node_id(part, total, line_no, raw))

    for required in ("NODE_COORD_SECTION", "DEMAND_SECTION", "DEPOT_SECTION"):
        if required not in seen_sections:
            raise InstanceFormatError(f"missing {required}")
    if total is None:
        total = _total_nodes(header, header_lines)

    weight_key = "EDGE_WEIGHT_TYPE" if "EDGE_WEIGHT_TYPE" in header else "EDGE_WEIGHT_FORMAT"
    if weight_key in header and header[weight_key].upper() != "EUC_2D":
        line_no, raw = header_lines[weight_key]
        raise InstanceFormatError(f"unsupported edge weight type {header[weight_key]!r}", line_no, raw)

    missing = [i + 1 for i in range(total) if i not in coords]
    if missing:
        raise InstanceFormatError(f"missing coordinates for node ids {missing[:10]}")
    if len(depot_ids) != 1:
        raise InstanceFormatError(f"DEPOT_SECTION must list exactly one depot, found {len(depot_ids)}")
    expected_stations = int(_header_number(header, header_lines, "STATIONS"))
    if len(set(station_ids)) != expected_stations:
        raise InstanceFormatError(
            f"STATIONS header says {expected_stations}, station section lists {len(set(station_ids))}"
        )

    capacity = _header_number(header, header_lines, "CAPACITY")
    depot = depot_ids[0]
    stations = set(station_ids)
    if depot in stations:
        raise InstanceFormatError(f"node id {depot + 1} is listed both as depot and as station")

    kinds: List[NodeKind] = []
    node_demands: List[float] = []
    for node in range(total):
        demand, line_no, raw = demands.get(node, (0.0, None, None))
        if node == depot:
            kind = NodeKind.DEPOT
        elif node in stations:
            kind = NodeKind.AFS
        else:
            kind = NodeKind.CUSTOMER
            if node not in demands:
                raise InstanceFormatError(f"customer node id {node + 1} has no demand line")
        if kind is not NodeKind.CUSTOMER and demand != 0:
            raise InstanceFormatError(f"{kind.value} node must have zero demand", line_no, raw)
        if demand > capacity:
            raise InstanceFormatError(f"demand exceeds capacity ({demand} > {capacity})", line_no, raw)
        kinds.append(kind)
        node_demands.append(demand)

    optimal = header.get("OPTIMAL_VALUE")
    vehicles = header.get("VEHICLES")
    inst = Instance(
        name=header.get("NAME", name or "unnamed"),
        kinds=tuple(kinds),
        coords=tuple(coords[i] for i in range(total)),
        demands=tuple(node_demands),
        cargo_capacity=capacity,
        battery_capacity=_header_number(header, header_lines, "ENERGY_CAPACITY"),
        consumption_rate=_header_number(header, header_lines, "ENERGY_CONSUMPTION"),
        optimal_value=_header_number(header, header_lines, "OPTIMAL_VALUE") if optimal else None,
        vehicles=int(_header_number(header, header_lines, "VEHICLES")) if vehicles else None,
    )

    stranded = inst.unreachable_customers()
    if stranded:
        logger.warning(
            "%s: %d customer(s) farther than reach/2 from every recharge point; repair may fail (first: %s)",
            inst.name, len(stranded), stranded[:5],
        )
    return inst


def _header_number(header: Dict[str, str], header_lines: Dict[str, Tuple[int, str]], key: str) -> float:
    if key not in header:
        raise InstanceFormatError(f"missing header {key}")
    line_no, raw = header_lines[key]
    return _number(header[key], line_no, raw)


def _total_nodes(header: Dict[str, str], header_lines: Dict[str, Tuple[int, str]]) -> int:
    dimension = _header_number(header, header_lines, "DIMENSION")
    stations = _header_number(header, header_lines, "STATIONS")
    if dimension < 1 or stations < 0 or not dimension.is_integer() or not stations.is_integer():
        line_no, raw = header_lines["DIMENSION"]
        raise InstanceFormatError("DIMENSION and STATIONS must be non-negative integers", line_no, raw)
    return int(dimension) + int(stations)


def load_instance(path: Union[str, Path]) -> Instance:
    """Read an instance file from disk."""
    path = Path(path)
    with open(path, "rb") as f:
        return parse_instance(f, name=path.stem)


def _fmt(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else repr(float(value))


def format_instance(inst: Instance) -> str:
    """Render an instance in the competition text format."""
    out = io.StringIO()
    out.write(f"NAME: {inst.name}\n")
    out.write("TYPE: EVRP\n")
    if inst.optimal_value is not None:
        out.write(f"OPTIMAL_VALUE: {_fmt(inst.optimal_value)}\n")
    if inst.vehicles is not None:
        out.write(f"VEHICLES: {inst.vehicles}\n")
    out.write(f"DIMENSION: {inst.size - len(inst.stations)}\n")
    out.write(f"STATIONS: {len(inst.stations)}\n")
    out.write(f"CAPACITY: {_fmt(inst.cargo_capacity)}\n")
    out.write(f"ENERGY_CAPACITY: {_fmt(inst.battery_capacity)}\n")
    out.write(f"ENERGY_CONSUMPTION: {_fmt(inst.consumption_rate)}\n")
    out.write("EDGE_WEIGHT_TYPE: EUC_2D\n")
    out.write("NODE_COORD_SECTION\n")
    for node, (x, y) in enumerate(inst.coords):
        out.write(f"{node + 1} {_fmt(x)} {_fmt(y)}\n")
    out.write("DEMAND_SECTION\n")
    for node, demand in enumerate(inst.demands):
        if inst.kinds[node] is not NodeKind.AFS:
            out.write(f"{node + 1} {_fmt(demand)}\n")
    out.write("STATIONS_COORD_SECTION\n")
    for node in inst.stations:
        out.write(f"{node + 1}\n")
    out.write("DEPOT_SECTION\n")
    out.write(f"{inst.depot + 1}\n-1\nEOF\n")
    return out.getvalue()


def write_instance(inst: Instance, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text(format_instance(inst))
    return path


def make_instance(
    name: str,
    depot: Tuple[float, float],
    customers: Sequence[Tuple[float, float, float]],
    stations: Sequence[Tuple[float, float]],
    cargo_capacity: float,
    battery_capacity: float,
    consumption_rate: float = 1.0,
) -> Instance:
    """
    Build an instance from plain coordinates.

    Node order is depot, then customers ``(x, y, demand)``, then stations.
    """
    kinds = [NodeKind.DEPOT] + [NodeKind.CUSTOMER] * len(customers) + [NodeKind.AFS] * len(stations)
    coords = [tuple(map(float, depot))] + [(float(x), float(y)) for x, y, _ in customers]
    coords += [(float(x), float(y)) for x, y in stations]
    demands = [0.0] + [float(d) for _, _, d in customers] + [0.0] * len(stations)
    return Instance(
        name=name,
        kinds=tuple(kinds),
        coords=tuple(coords),
        demands=tuple(demands),
        cargo_capacity=float(cargo_capacity),
        battery_capacity=float(battery_capacity),
        consumption_rate=float(consumption_rate),
    )
