"""
Tests for the evrp-vns command line.
"""

import pytest

from evrp_vns.cli import (
    EXIT_ERROR,
    EXIT_INVALID,
    EXIT_OK,
    build_parser,
    main,
    resolve_instance_path,
    search_params,
    stop_spec,
)
from evrp_vns.construction import ConstructionId
from evrp_vns.core import read_solution, validate
from evrp_vns.instance import load_instance, write_instance


@pytest.fixture
def small_file(small_instance, temp_dir):
    return write_instance(small_instance, temp_dir / "small-n5-s2.evrp")


class TestArguments:
    """Test flag handling."""

    def test_setup_string_with_override(self):
        """Test that individual flags override the setup string."""
        args = build_parser().parse_args(["solve", "x.evrp", "--setup", "VNS_zga_c:0_ls:111_p:3_r:0.5", "-p", "4"])
        params = search_params(args, seed=9)
        assert params.construction == ConstructionId.parse("c:0")
        assert params.neighborhoods.bits == "111"
        assert (params.p, params.r, params.seed) == (4, 0.5, 9)

    def test_defaults(self):
        """Test the tuned defaults and the default stop."""
        args = build_parser().parse_args(["solve", "x.evrp"])
        assert search_params(args).setup_string == "VNS_zga_c:14_ls:110_p:2_r:0.35"
        spec = stop_spec(args)
        assert spec.evals is None and not spec.reference_time

    def test_time_budget_flags(self):
        """Test the competition time limit flags."""
        args = build_parser().parse_args(["solve", "x.evrp", "--competition-time-limit", "--nu", "2", "--cpu-ratio", "0.9305"])
        spec = stop_spec(args)
        assert spec.reference_time and spec.nu == 2 and spec.cpu_ratio == 0.9305

    def test_stop_flags_exclusive(self):
        """Test that two stop flags are refused by the parser."""
        with pytest.raises(SystemExit):
            build_parser().parse_args(["solve", "x.evrp", "--evals", "10", "--time-limit", "1"])

    def test_dataset_lookup(self, small_file, monkeypatch):
        """Test resolving a bare instance name against the dataset directory."""
        monkeypatch.setenv("EVRP_DATASET_DIR", str(small_file.parent))
        assert resolve_instance_path("small-n5-s2") == small_file
        with pytest.raises(FileNotFoundError):
            resolve_instance_path("missing")


class TestSolveAndValidate:
    """Test solve output and validation of it."""

    def test_solve_writes_solution(self, small_file, temp_dir, capsys):
        """Test that solve writes a valid solution and a progress CSV."""
        sol = temp_dir / "small.sol"
        progress = temp_dir / "progress.csv"
        code = main(["solve", str(small_file), "--evals", "300", "-o", str(sol), "--progress-csv", str(progress), "--quiet"])
        assert code == EXIT_OK
        tour, claimed = read_solution(sol)
        assert validate(load_instance(small_file), tour).valid
        assert progress.read_text().startswith("elapsed_s,evals,best_weight")
        assert "Weight:" in capsys.readouterr().out

        assert main(["validate", str(small_file), str(sol), "--quiet"]) == EXIT_OK
        assert f"VALID, weight {claimed:.2f}" in capsys.readouterr().out

    def test_ore_with_zero_budget(self, small_file, small_instance, temp_dir):
        """Test that a zero budget emits the one-route-per-customer tour."""
        sol = temp_dir / "ore.sol"
        assert main(["solve", str(small_file), "--construction", "c0", "--evals", "0", "-o", str(sol), "--quiet"]) == 0
        tour, _ = read_solution(sol)
        customers = [n for n in tour if n in small_instance.customers]
        assert customers == [1, 2, 3, 4]
        assert tour.count(0) >= 5

    def test_missing_customer(self, small_file, temp_dir, capsys):
        """Test that an incomplete tour is reported with exit 1."""
        sol = temp_dir / "bad.sol"
        sol.write_text("0 1 2 0\n")
        assert main(["validate", str(small_file), str(sol), "--quiet"]) == EXIT_INVALID
        out = capsys.readouterr().out
        assert "INVALID" in out
        assert "CustomerCoverage" in out

    def test_weight_mismatch(self, line_instance, temp_dir, capsys):
        """Test that a wrong claimed weight fails validation."""
        inst_path = write_instance(line_instance, temp_dir / "line.evrp")
        sol = temp_dir / "line.sol"
        sol.write_text("0 2 1 2 0\n161.00\n")
        assert main(["validate", str(inst_path), str(sol), "--quiet"]) == EXIT_INVALID
        assert "Weight mismatch" in capsys.readouterr().out

    def test_missing_instance(self, capsys):
        """Test that a missing file is an error."""
        assert main(["solve", "no-such-instance.evrp", "--quiet"]) == EXIT_ERROR
        assert "ERROR" in capsys.readouterr().err

    def test_malformed_solution(self, small_file, temp_dir):
        """Test that an unparsable solution is an error."""
        sol = temp_dir / "junk.sol"
        sol.write_text("zero one\n")
        assert main(["validate", str(small_file), str(sol), "--quiet"]) == EXIT_ERROR

    def test_no_command(self):
        """Test that running without a subcommand prints help and fails."""
        assert main([]) == EXIT_ERROR


class TestBenchAndFixture:
    """Test the bench and fixture subcommands."""

    def test_fixture_then_bench(self, temp_dir, capsys):
        """Test generating fixtures with optima and benchmarking them."""
        out_dir = temp_dir / "fixtures"
        assert main(["fixture", str(out_dir), "--count", "3", "--customers", "4", "--seed", "5", "--solve", "--quiet"]) == 0
        assert len(list(out_dir.glob("*.evrp"))) == 3
        assert len(list(out_dir.glob("*.sol"))) == 3
        assert "optimum" in capsys.readouterr().out

        for sol in out_dir.glob("*.sol"):
            assert main(["validate", str(sol.with_suffix(".evrp")), str(sol), "--quiet"]) == EXIT_OK
        capsys.readouterr()

        csv_path = temp_dir / "report.csv"
        code = main([
            "bench", str(out_dir), "--runs", "2", "--evals", "200", "--workers", "1",
            "--no-cache", "--csv", str(csv_path), "--quiet",
        ])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "fixture-5-000" in out
        assert "runs=2 seeds=1..2" in out
        assert len(csv_path.read_text().splitlines()) == 4

    def test_bench_with_cache(self, small_file, temp_dir, capsys):
        """Test that a second bench is served from the cache."""
        args = [
            "bench", str(small_file), "--runs", "1", "--evals", "100", "--workers", "1",
            "--cache-path", str(temp_dir / "cache"), "--quiet",
        ]
        assert main(args) == EXIT_OK
        capsys.readouterr()
        assert main(args) == EXIT_OK
        assert "Cache: 1 hits, 0 misses" in capsys.readouterr().out

    def test_bench_needs_paths(self, monkeypatch, capsys):
        """Test that bench without paths needs the dataset directory."""
        monkeypatch.delenv("EVRP_DATASET_DIR", raising=False)
        assert main(["bench", "--quiet"]) == EXIT_ERROR
        assert "EVRP_DATASET_DIR" in capsys.readouterr().err
