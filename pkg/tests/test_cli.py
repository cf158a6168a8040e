"""Tests for the propdb command line."""

import pytest

from propdb.cli import RunConfig, build_parser, main, read_query_text
from propdb.constants import EXIT_DATA, EXIT_OK, EXIT_ORACLE, EXIT_USAGE
from propdb.errors import UsageError

from .fixtures import (
    PLAN_X_OUTER,
    PLAN_Y_OUTER,
    TWO_PLAN_QUERY,
    PATH_QUERY,
    two_plan_db,
    path_db,
    write_instance,
)


@pytest.fixture
def two_plan_files(tmp_path):
    """Schema and data directory of the chain instance."""
    return write_instance(two_plan_db(), tmp_path)


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestPlansCommand:
    """Test cases for propdb plans."""

    @pytest.mark.unit
    def test_lists_plans(self, capsys, two_plan_files):
        """Test both chain plans are listed in order."""
        schema, _ = two_plan_files
        code, out, _ = run(capsys, "plans", "--schema", str(schema), "--query", TWO_PLAN_QUERY)
        assert code == EXIT_OK
        assert "# 2 minimal plans" in out
        assert f"1\t{PLAN_X_OUTER}" in out
        assert f"2\t{PLAN_Y_OUTER}" in out

    @pytest.mark.unit
    def test_safe_query(self, capsys, two_plan_files):
        """Test a query with one plan is reported safe."""
        schema, _ = two_plan_files
        code, out, _ = run(capsys, "plans", "--schema", str(schema), "--query", "q() :- R(x), S(x)")
        assert code == EXIT_OK
        assert "SAFE" in out.splitlines()

    @pytest.mark.unit
    def test_matrices_and_views(self, capsys, two_plan_files):
        """Test incidence matrices mark dissociated cells and views are printed."""
        schema, _ = two_plan_files
        code, out, _ = run(
            capsys, "plans", "--schema", str(schema), "--query", TWO_PLAN_QUERY, "--matrices", "--emit-views"
        )
        assert code == EXIT_OK
        assert "•" in out
        assert "# views" in out
        assert "main = min( " in out

    @pytest.mark.unit
    def test_query_from_file(self, capsys, two_plan_files, tmp_path):
        """Test the query may be given as a file."""
        schema, _ = two_plan_files
        query_file = tmp_path / "q.txt"
        query_file.write_text(TWO_PLAN_QUERY + "\n", encoding="utf-8")
        code, out, _ = run(capsys, "plans", "--schema", str(schema), "--query", str(query_file))
        assert code == EXIT_OK
        assert "# 2 minimal plans" in out


class TestEvalCommand:
    """Test cases for propdb eval."""

    @pytest.mark.unit
    def test_propagation(self, capsys, two_plan_files):
        """Test the propagation score prints at full precision."""
        schema, data = two_plan_files
        code, out, _ = run(capsys, "eval", "--schema", str(schema), "--data", str(data), "--query", TWO_PLAN_QUERY)
        assert code == EXIT_OK
        lines = out.splitlines()
        assert lines[0] == "score"
        assert float(lines[1]) == pytest.approx(169 / 1024, abs=1e-15)

    @pytest.mark.unit
    def test_exact(self, capsys, two_plan_files):
        """Test the exact method prints 83/512."""
        schema, data = two_plan_files
        code, out, _ = run(
            capsys, "eval", "--schema", str(schema), "--data", str(data), "--query", TWO_PLAN_QUERY, "--method", "exact"
        )
        assert code == EXIT_OK
        assert out == "score\n0.162109375\n"

    @pytest.mark.unit
    def test_single_plan_method(self, capsys, two_plan_files):
        """Test plan:2 evaluates the second minimal plan only."""
        schema, data = two_plan_files
        args = ["eval", "--schema", str(schema), "--data", str(data), "--query", TWO_PLAN_QUERY]
        code, out, _ = run(capsys, *args, "--method", "plan:2")
        assert code == EXIT_OK
        assert float(out.splitlines()[1]) == pytest.approx(353 / 2048, abs=1e-15)
        code, _, err = run(capsys, *args, "--method", "plan:3")
        assert code == EXIT_USAGE
        assert "2 minimal plans" in err

    @pytest.mark.unit
    @pytest.mark.parametrize("opt", ["single", "views", "semijoin", "all"])
    def test_optimisations(self, capsys, two_plan_files, opt):
        """Test every pipeline prints the same score."""
        schema, data = two_plan_files
        code, out, _ = run(
            capsys, "eval", "--schema", str(schema), "--data", str(data), "--query", TWO_PLAN_QUERY, "--opt", opt
        )
        assert code == EXIT_OK
        assert float(out.splitlines()[1]) == pytest.approx(169 / 1024)

    @pytest.mark.unit
    def test_monte_carlo_reproducible(self, capsys, two_plan_files):
        """Test the same seed prints the same estimate."""
        schema, data = two_plan_files
        args = ["eval", "--schema", str(schema), "--data", str(data), "--query", TWO_PLAN_QUERY, "--method", "mc"]
        first = run(capsys, *args, "--samples", "2000", "--seed", "4")
        second = run(capsys, *args, "--samples", "2000", "--seed", "4", "--workers", "3")
        assert first[0] == EXIT_OK
        assert first[1] == second[1]

    @pytest.mark.unit
    def test_lineage_rank(self, capsys, tmp_path):
        """Test lineage-rank scores the number of witnesses."""
        schema, data = write_instance(path_db(), tmp_path)
        code, out, _ = run(
            capsys,
            "eval",
            "--schema",
            str(schema),
            "--data",
            str(data),
            "--query",
            PATH_QUERY,
            "--method",
            "lineage-rank",
        )
        assert code == EXIT_OK
        assert out == "score\n4.0\n"

    @pytest.mark.unit
    def test_output_file(self, capsys, two_plan_files, tmp_path):
        """Test --output also writes the TSV."""
        schema, data = two_plan_files
        target = tmp_path / "out.tsv"
        code, out, _ = run(
            capsys,
            "eval",
            "--schema",
            str(schema),
            "--data",
            str(data),
            "--query",
            TWO_PLAN_QUERY,
            "--output",
            str(target),
        )
        assert code == EXIT_OK
        assert target.read_text(encoding="utf-8") == out

    @pytest.mark.unit
    def test_answers_in_head_order(self, capsys, two_plan_files):
        """Test non-Boolean answers print one row each under the head columns."""
        schema, data = two_plan_files
        code, out, _ = run(
            capsys, "eval", "--schema", str(schema), "--data", str(data), "--query", "q(y, x) :- T(x, y)"
        )
        assert code == EXIT_OK
        lines = out.splitlines()
        assert lines[0] == "y\tx\tscore"
        assert sorted(lines[1:]) == ["1\t1\t0.5", "2\t1\t0.5", "2\t2\t0.5"]


class TestExitCodes:
    """Test cases for error handling in main."""

    @pytest.mark.unit
    def test_zero_samples(self, capsys, two_plan_files):
        """Test --samples 0 is a usage error."""
        schema, data = two_plan_files
        code, _, err = run(
            capsys,
            "eval",
            "--schema",
            str(schema),
            "--data",
            str(data),
            "--query",
            TWO_PLAN_QUERY,
            "--method",
            "mc",
            "--samples",
            "0",
        )
        assert code == EXIT_USAGE
        assert "--samples" in err

    @pytest.mark.unit
    def test_optimisation_needs_propagation(self, capsys, two_plan_files):
        """Test --opt with another method is a usage error."""
        schema, data = two_plan_files
        code, _, _ = run(
            capsys,
            "eval",
            "--schema",
            str(schema),
            "--data",
            str(data),
            "--query",
            TWO_PLAN_QUERY,
            "--method",
            "exact",
            "--opt",
            "single",
        )
        assert code == EXIT_USAGE

    @pytest.mark.unit
    def test_eval_needs_data(self, capsys, two_plan_files):
        """Test eval without --data is a usage error."""
        schema, _ = two_plan_files
        code, _, _ = run(capsys, "eval", "--schema", str(schema), "--query", TWO_PLAN_QUERY)
        assert code == EXIT_USAGE

    @pytest.mark.unit
    def test_unknown_relation(self, capsys, two_plan_files):
        """Test a query over an unknown relation is a data error."""
        schema, _ = two_plan_files
        code, _, err = run(capsys, "plans", "--schema", str(schema), "--query", "q() :- Z(x)")
        assert code == EXIT_DATA
        assert "unknown relation" in err

    @pytest.mark.unit
    def test_missing_schema(self, capsys, tmp_path):
        """Test an unreadable schema is a data error."""
        code, _, _ = run(capsys, "plans", "--schema", str(tmp_path / "none.txt"), "--query", TWO_PLAN_QUERY)
        assert code == EXIT_DATA

    @pytest.mark.unit
    def test_oracle_limit(self, capsys, two_plan_files):
        """Test an exact oracle over the limit exits with the oracle code."""
        schema, data = two_plan_files
        code, _, err = run(
            capsys,
            "eval",
            "--schema",
            str(schema),
            "--data",
            str(data),
            "--query",
            TWO_PLAN_QUERY,
            "--method",
            "exact",
            "--limit",
            "2",
        )
        assert code == EXIT_ORACLE
        assert "limit" in err

    @pytest.mark.unit
    def test_argparse_errors_exit(self):
        """Test a missing subcommand exits through argparse."""
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2


class TestCompareCommand:
    """Test cases for propdb compare."""

    @pytest.mark.unit
    def test_single_trial(self, capsys, two_plan_files):
        """Test one trial on the loaded probabilities gives AP 1 for every method."""
        schema, data = two_plan_files
        code, out, _ = run(
            capsys,
            "compare",
            "--schema",
            str(schema),
            "--data",
            str(data),
            "--query",
            TWO_PLAN_QUERY,
            "--samples",
            "500",
            "--no-timing",
        )
        assert code == EXIT_OK
        lines = out.splitlines()
        assert lines[0] == "trial\tmethod\tap@10\truntime_ms"
        assert "0\tpropagation\t1.0\t-" in lines
        assert "propagation\t1.0" in lines
        exact, propagation, _, witnesses = lines[-1].split("\t")
        assert exact == "0.162109375"
        assert float(propagation) == pytest.approx(169 / 1024, abs=1e-15)
        assert witnesses == "3.0"

    @pytest.mark.unit
    def test_byte_identical(self, capsys, tmp_path):
        """Test repeated runs with --no-timing print the same bytes."""
        schema, data = write_instance(two_plan_db(), tmp_path)
        args = [
            "compare",
            "--schema",
            str(schema),
            "--data",
            str(data),
            "--query",
            "q(x) :- R(x), T(x, y), U(y)",
            "--trials",
            "3",
            "--seed",
            "5",
            "--samples",
            "300",
            "--k",
            "1",
            "--no-timing",
        ]
        first = run(capsys, *args)
        second = run(capsys, *args)
        assert first[0] == EXIT_OK
        assert first[1] == second[1]
        assert sum(1 for line in first[1].splitlines() if line.startswith(("0\t", "1\t", "2\t"))) >= 12


class TestDissociateCommand:
    """Test cases for propdb dissociate."""

    @pytest.mark.unit
    def test_chain(self, capsys, two_plan_files):
        """Test the lattice summary of the chain R,S,T,U."""
        schema, _ = two_plan_files
        code, out, _ = run(capsys, "dissociate", "--schema", str(schema), "--query", TWO_PLAN_QUERY)
        assert code == EXIT_OK
        assert "cells: 3" in out
        assert "lattice size: 8" in out
        assert "safe dissociations: 5" in out
        assert "variable hierarchies: 3" in out
        assert "minimal plans: 2" in out


class TestRunConfig:
    """Test cases for RunConfig."""

    @pytest.mark.unit
    def test_defaults(self, tmp_path):
        """Test parsed defaults validate."""
        args = build_parser().parse_args(["eval", "--schema", "s.txt", "--data", str(tmp_path), "--query", "q"])
        cfg = RunConfig.from_args(args)
        assert cfg.method == "propagation"
        assert cfg.timing

    @pytest.mark.unit
    @pytest.mark.parametrize("method", ["fast", "plan:0", "plan:x"])
    def test_bad_methods(self, method, tmp_path):
        """Test unknown method names are rejected."""
        with pytest.raises(UsageError):
            RunConfig("eval", tmp_path, "q", data=tmp_path, method=method).validate()

    @pytest.mark.unit
    def test_query_text_passthrough(self):
        """Test query text that is not a file is returned unchanged."""
        assert read_query_text(TWO_PLAN_QUERY) == TWO_PLAN_QUERY
