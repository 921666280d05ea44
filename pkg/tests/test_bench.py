"""
Tests for the multi-seed benchmark harness.
"""

import csv
import io
import random

import pytest

from evrp_vns.bench import (
    CSV_COLUMNS,
    REFERENCE_SCORES,
    BenchReport,
    BenchRow,
    StopSpec,
    find_instances,
    gap,
    load_reference_scores,
    run_bench,
    run_one,
    run_request,
)
from evrp_vns.instance import write_instance
from evrp_vns.oracle import gen_fixture
from evrp_vns.result_cache import ResultCache
from evrp_vns.vns import SearchParams, StopKind


@pytest.fixture
def fixture_dir(temp_dir):
    """Three tiny instances written as .evrp files."""
    rng = random.Random(77)
    for k in range(3):
        write_instance(gen_fixture(rng, 4, 1, name=f"tiny-{k}"), temp_dir / f"tiny-{k}.evrp")
    return temp_dir


class TestReferenceScores:
    """Test best-known scores and gaps."""

    def test_bundled_scores(self):
        """Test the shipped reference file."""
        scores = load_reference_scores()
        assert len(scores) == 17
        assert scores["E-n22-k4"] == 384.67
        assert scores["E-n33-k4"] == 840.14

    def test_bundled_origins(self):
        """Test that every shipped score names the result it was taken from."""
        with open(REFERENCE_SCORES, newline="") as f:
            origins = {row["instance"]: row["origin"] for row in csv.DictReader(f)}
        assert len(origins) == 17
        assert all(origin.startswith("BACO comparison: ") for origin in origins.values())
        assert origins["X-n351-k40"] == "BACO comparison: BACO min"
        assert origins["X-n1001-k43"] == "BACO comparison: VNS min"
        assert "competition results" in origins["E-n22-k4"]

    def test_gap(self):
        """Test the percentage gap."""
        assert gap(384.67, 384.67) == 0.0
        assert gap(110.0, 100.0) == pytest.approx(10.0)

    def test_custom_file(self, temp_dir):
        """Test reading a user reference file."""
        path = temp_dir / "refs.csv"
        path.write_text("instance,bks\ntiny-0,12.5\n")
        assert load_reference_scores(path) == {"tiny-0": 12.5}


class TestReport:
    """Test aggregation and rendering."""

    def test_row_statistics(self):
        """Test min, mean, population stdev and gaps."""
        row = BenchRow.from_weights("x", [10.0, 12.0], bks=10.0)
        assert (row.runs, row.min, row.mean, row.stdev) == (2, 10.0, 11.0, 1.0)
        assert row.gap_min == 0.0
        assert row.gap_mean == pytest.approx(10.0)
        assert row.mean_ref == pytest.approx(1.1)

    def test_row_without_reference(self):
        """Test that gaps stay empty without a best-known score."""
        row = BenchRow.from_weights("x", [5.0])
        assert row.stdev == 0.0
        assert row.gap_min is None

    def test_table(self):
        """Test the plain-text table, errors included."""
        report = BenchReport(
            rows=[BenchRow.from_weights("alpha", [1.0, 2.0]), BenchRow("broken", 0, error="bad file")],
            runs=2,
            seeds=[1, 2],
        )
        table = report.to_table()
        assert "alpha" in table
        assert "ERROR: bad file" in table
        assert table.splitlines()[-1] == "runs=2 seeds=1..2"

    def test_csv_columns(self):
        """Test the stable CSV header and empty cells for missing values."""
        report = BenchReport(rows=[BenchRow.from_weights("alpha", [1.0, 2.0])], runs=2, seeds=[1, 2])
        out = io.StringIO()
        report.write_csv(out)
        lines = out.getvalue().splitlines()
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert lines[1].startswith("alpha,2,1.000000,1.500000,0.500000,,")


class TestStopSpec:
    """Test instance-independent stop descriptions."""

    def test_exclusive(self):
        """Test that only one stop may be chosen."""
        with pytest.raises(ValueError):
            StopSpec(evals=10, time_limit=1.0)

    def test_resolve(self, small_instance):
        """Test resolution against an instance."""
        assert StopSpec().resolve(small_instance).eval_cap == 175000
        assert StopSpec(evals_per_node=10).resolve(small_instance).eval_cap == 70
        assert StopSpec(evals=5).resolve(small_instance).eval_cap == 5
        assert StopSpec(time_limit=2.0).resolve(small_instance).kind is StopKind.WALL_CLOCK
        assert StopSpec(reference_time=True, nu=2).resolve(small_instance).time_cap == pytest.approx(432.0)


class TestRunBench:
    """Test running instances over seeds."""

    def test_find_instances(self, fixture_dir):
        """Test directory expansion."""
        found = find_instances([fixture_dir])
        assert [p.name for p in found] == ["tiny-0.evrp", "tiny-1.evrp", "tiny-2.evrp"]

    def test_run_one(self, fixture_dir):
        """Test a single seeded run."""
        result = run_one(str(fixture_dir / "tiny-0.evrp"), SearchParams(), StopSpec(evals=200), 3)
        assert result["seed"] == 3
        assert result["evals"] <= 200
        assert result["tour"][0] == result["tour"][-1] == 0

    def test_in_process(self, fixture_dir):
        """Test one row per instance with every run counted."""
        report = run_bench([fixture_dir], SearchParams(), StopSpec(evals=300), runs=2, workers=1)
        assert [row.instance for row in report.rows] == ["tiny-0", "tiny-1", "tiny-2"]
        for row in report.rows:
            assert row.runs == 2
            assert row.stdev >= 0
            assert row.min <= row.mean
            assert row.error == ""

    def test_bad_file_is_recorded(self, fixture_dir):
        """Test that a broken instance becomes an error row."""
        (fixture_dir / "zz-broken.evrp").write_text("NAME: broken\nEOF\n")
        report = run_bench([fixture_dir], SearchParams(), StopSpec(evals=100), runs=1, workers=1)
        assert len(report.rows) == 4
        assert report.rows[-1].error

    def test_cache_reuse(self, fixture_dir, temp_dir):
        """Test that cached seeds are not run again and give the same report."""
        cache = ResultCache(cache_dir=str(temp_dir / "cache"))
        paths = [fixture_dir / "tiny-1.evrp"]
        first = run_bench(paths, SearchParams(), StopSpec(evals=300), runs=2, workers=1, cache=cache)
        second = run_bench(paths, SearchParams(), StopSpec(evals=300), runs=3, workers=1, cache=cache)
        stats = cache.get_stats()
        cache.shutdown()
        assert stats["hits"] == 1
        assert stats["total_results"] == 3
        assert second.rows[0].runs == 3
        assert second.rows[0].min <= first.rows[0].min

    def test_request_ignores_seeds(self, small_instance):
        """Test that the cache request varies with setup but not seeds."""
        a = run_request(small_instance, SearchParams(), StopSpec(evals=10), [1, 2])
        b = run_request(small_instance, SearchParams(p=3), StopSpec(evals=10), [1, 2])
        assert a["seeds"] == [1, 2]
        assert a["stop"] == "evals:10"
        assert a["p"] != b["p"]

    def test_runs_validated(self, fixture_dir):
        """Test that at least one run is required."""
        with pytest.raises(ValueError):
            run_bench([fixture_dir], SearchParams(), StopSpec(evals=10), runs=0)

    @pytest.mark.slow
    def test_worker_pool(self, fixture_dir):
        """Test that parallel runs match in-process runs."""
        paths = [fixture_dir / "tiny-2.evrp"]
        serial = run_bench(paths, SearchParams(), StopSpec(evals=300), runs=2, workers=1)
        parallel = run_bench(paths, SearchParams(), StopSpec(evals=300), runs=2, workers=2)
        assert serial.rows[0].min == parallel.rows[0].min
        assert serial.rows[0].mean == parallel.rows[0].mean
