"""
Tests for instance parsing, writing and derived lookups.
"""

import logging
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from evrp_vns.errors import InstanceFormatError
from evrp_vns.instance import (
    NodeKind,
    format_instance,
    load_instance,
    make_instance,
    parse_instance,
    write_instance,
)

from .conftest import SMALL_INSTANCE_TEXT


class TestParse:
    """Test reading the competition format."""

    def test_header_and_sections(self, small_instance):
        """Test that headers and sections map onto the instance fields."""
        inst = small_instance
        assert inst.name == "small-n5-s2"
        assert inst.size == 7
        assert inst.depot == 0
        assert inst.customers == (1, 2, 3, 4)
        assert inst.stations == (5, 6)
        assert inst.recharge_points == (0, 5, 6)
        assert inst.cargo_capacity == 10
        assert inst.battery_capacity == 100
        assert inst.consumption_rate == 1.0
        assert inst.vehicles == 2
        assert inst.optimal_value is None

    def test_node_kinds_and_demands(self, small_instance):
        """Test that station nodes get zero demand and customers keep theirs."""
        assert small_instance.kinds[0] is NodeKind.DEPOT
        assert small_instance.kinds[5] is NodeKind.AFS
        assert small_instance.demands[1:5] == (3, 4, 5, 2)
        assert small_instance.demands[5] == 0

    def test_header_keys_case_insensitive(self):
        """Test that header keys are matched regardless of case."""
        text = SMALL_INSTANCE_TEXT.replace("CAPACITY: 10", "capacity: 10")
        assert parse_instance(text).cargo_capacity == 10

    def test_parse_bytes(self):
        """Test that raw bytes are accepted."""
        inst = parse_instance(SMALL_INSTANCE_TEXT.encode("utf-8"))
        assert inst.size == 7

    def test_demand_above_capacity_names_line(self):
        """Test that a demand above capacity is rejected with its line number."""
        text = SMALL_INSTANCE_TEXT.replace("4 5\n", "4 11\n")
        with pytest.raises(InstanceFormatError) as exc:
            parse_instance(text)
        assert "demand exceeds capacity" in str(exc.value)
        assert exc.value.line_no is not None
        assert "4 11" in exc.value.line

    def test_missing_section(self):
        """Test that a missing demand section is an error."""
        start = SMALL_INSTANCE_TEXT.index("DEMAND_SECTION")
        stop = SMALL_INSTANCE_TEXT.index("STATIONS_COORD_SECTION")
        with pytest.raises(InstanceFormatError, match="DEMAND_SECTION"):
            parse_instance(SMALL_INSTANCE_TEXT[:start] + SMALL_INSTANCE_TEXT[stop:])

    def test_unsupported_weight_type(self):
        """Test that only EUC_2D distances are accepted."""
        text = SMALL_INSTANCE_TEXT.replace("EUC_2D", "GEO")
        with pytest.raises(InstanceFormatError, match="GEO"):
            parse_instance(text)

    def test_bad_number(self):
        """Test that a malformed coordinate reports the offending line."""
        text = SMALL_INSTANCE_TEXT.replace("3 10 10\n", "3 10 ten\n")
        with pytest.raises(InstanceFormatError) as exc:
            parse_instance(text)
        assert exc.value.line == "3 10 ten"

    def test_station_count_mismatch(self):
        """Test that the STATIONS header must match the station section."""
        text = SMALL_INSTANCE_TEXT.replace("STATIONS: 2", "STATIONS: 1")
        with pytest.raises(InstanceFormatError):
            parse_instance(text)

    def test_customer_without_demand(self):
        """Test that every customer needs a demand line."""
        text = SMALL_INSTANCE_TEXT.replace("5 2\n", "")
        with pytest.raises(InstanceFormatError, match="no demand line"):
            parse_instance(text)

    def test_far_customer_warns(self, caplog):
        """Test that a customer beyond half the reach of every recharge point is logged."""
        text = SMALL_INSTANCE_TEXT.replace("4 70 0\n", "4 95 0\n")
        with caplog.at_level(logging.WARNING, logger="evrp_vns.instance"):
            parse_instance(text)
        assert "farther than reach/2" in caplog.text


class TestDerived:
    """Test distances and precomputed lookups."""

    def test_distance_is_euclidean_and_symmetric(self, small_instance):
        """Test unrounded Euclidean distances."""
        assert small_instance.distance(0, 2) == pytest.approx(math.hypot(10, 10))
        assert small_instance.distance(2, 0) == small_instance.distance(0, 2)
        assert small_instance.distance(3, 3) == 0.0

    def test_matrix_is_read_only(self, small_instance):
        """Test that the distance matrix cannot be modified."""
        with pytest.raises(ValueError):
            small_instance.matrix[0, 1] = 5.0

    def test_pair_distances(self, small_instance):
        """Test vectorised distances against scalar ones."""
        a = np.array([0, 1, 3])
        b = np.array([3, 2, 6])
        expected = [small_instance.distance(i, j) for i, j in zip(a, b)]
        assert np.allclose(small_instance.pair_distances(a, b), expected)

    def test_nearest_recharge(self, small_instance):
        """Test the distance from each node to its closest recharge point."""
        assert small_instance.nearest_recharge[3] == pytest.approx(30.0)
        assert small_instance.nearest_recharge[0] == 0.0
        assert small_instance.nearest_recharge[6] == 0.0

    def test_reach(self, line_instance):
        """Test reach as battery over consumption."""
        assert line_instance.reach == 99.0

    def test_no_unreachable_customers(self, small_instance):
        """Test the half-reach assumption on a conforming instance."""
        assert small_instance.unreachable_customers() == []

    @given(
        st.lists(st.tuples(st.floats(-1000, 1000), st.floats(-1000, 1000)), min_size=2, max_size=8),
        st.data(),
    )
    def test_triangle_inequality(self, points, data):
        """Test d(i, k) <= d(i, j) + d(j, k) on sampled node triples."""
        customers = [(x, y, 1) for x, y in points[1:]]
        inst = make_instance("points", points[0], customers, [(0.0, 0.0)], cargo_capacity=1, battery_capacity=5000)
        nodes = st.integers(0, inst.size - 1)
        i, j, k = data.draw(nodes), data.draw(nodes), data.draw(nodes)
        assert inst.distance(i, k) <= inst.distance(i, j) + inst.distance(j, k) + 1e-9


class TestConstruction:
    """Test building instances in code."""

    def test_make_instance_node_order(self, line_instance):
        """Test that nodes are ordered depot, customers, stations."""
        assert line_instance.kinds == (NodeKind.DEPOT, NodeKind.CUSTOMER, NodeKind.AFS)
        assert line_instance.coords == ((0.0, 0.0), (80.0, 0.0), (50.0, 0.0))

    def test_rejects_demand_above_capacity(self):
        """Test that invariants are enforced on direct construction."""
        with pytest.raises(InstanceFormatError):
            make_instance("bad", (0, 0), [(1, 1, 20)], [], cargo_capacity=10, battery_capacity=10)

    def test_rejects_non_positive_battery(self):
        """Test that the energy capacity must be positive."""
        with pytest.raises(InstanceFormatError):
            make_instance("bad", (0, 0), [(1, 1, 1)], [], cargo_capacity=10, battery_capacity=0)


class TestWrite:
    """Test rendering the competition format."""

    def test_format_then_parse(self, small_instance):
        """Test that a written instance reads back equal."""
        assert parse_instance(format_instance(small_instance)) == small_instance

    def test_write_and_load(self, small_instance, temp_dir):
        """Test writing to disk and loading back."""
        path = write_instance(small_instance, temp_dir / "small.evrp")
        loaded = load_instance(path)
        assert loaded == small_instance
        assert "DIMENSION: 5" in path.read_text()
