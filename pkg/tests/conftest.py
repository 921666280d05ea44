"""
Shared fixtures for evrp-vns tests.
"""

import os
import random
import shutil
import tempfile
from pathlib import Path

import pytest

from evrp_vns.instance import make_instance, parse_instance
from evrp_vns.oracle import gen_fixture

DATASET_DIR = os.environ.get("EVRP_DATASET_DIR")

# Depot, four customers and two stations; customer 3 needs the station at node 6.
SMALL_INSTANCE_TEXT = """\
NAME: small-n5-s2
COMMENT: hand-made test instance
TYPE: EVRP
VEHICLES: 2
DIMENSION: 5
STATIONS: 2
CAPACITY: 10
ENERGY_CAPACITY: 100
ENERGY_CONSUMPTION: 1.0
EDGE_WEIGHT_TYPE: EUC_2D
NODE_COORD_SECTION
1 0 0
2 10 0
3 10 10
4 70 0
5 0 10
6 -30 0
7 40 0
DEMAND_SECTION
1 0
2 3
3 4
4 5
5 2
STATIONS_COORD_SECTION
6
7
DEPOT_SECTION
1
-1
EOF
"""


def pytest_collection_modifyitems(config, items):
    if DATASET_DIR:
        return
    skip = pytest.mark.skip(reason="set EVRP_DATASET_DIR to run dataset tests")
    for item in items:
        if "dataset" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def temp_dir():
    """Create a temporary directory."""
    path = tempfile.mkdtemp()
    yield Path(path)
    shutil.rmtree(path, ignore_errors=True)


@pytest.fixture
def line_instance():
    """
    Depot at 0, one customer at 80, one station at 50, reach 99.

    Node ids: depot 0, customer 1, station 2.
    """
    return make_instance("line", (0, 0), [(80, 0, 1)], [(50, 0)], cargo_capacity=10, battery_capacity=99)


@pytest.fixture
def open_instance():
    """Four customers near the depot, large battery: only capacity binds."""
    return make_instance(
        "open",
        (0, 0),
        [(10, 0, 4), (10, 10, 4), (0, 10, 4), (-10, 0, 4)],
        [(50, 50)],
        cargo_capacity=10,
        battery_capacity=1000,
    )


@pytest.fixture
def small_instance():
    """The parsed SMALL_INSTANCE_TEXT instance."""
    return parse_instance(SMALL_INSTANCE_TEXT)


@pytest.fixture
def fixtures():
    """Twenty generated tiny instances."""
    rng = random.Random(1234)
    return [gen_fixture(rng, rng.randint(3, 6), rng.randint(1, 2)) for _ in range(20)]


@pytest.fixture
def dataset_dir():
    return Path(DATASET_DIR) if DATASET_DIR else None
