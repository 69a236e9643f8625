"""Command-line interface: output formats, determinism, and exit codes."""

import json
import subprocess
import sys

import pytest

from bipcover.checks import run_suite
from bipcover.cli import SIMULATE_COLUMNS, SWEEP_COLUMNS, main
from bipcover.coalescent import g
from bipcover.streams import derive_seed

FIVE_TAXON_NEWICK = "((A:0.3,B:0.3):0.3,((C:0.3,D:0.3):0.3,E:0.3):0.3);\n"


def run_cli(args):
    return main(list(args))


def parse_csv(text):
    lines = text.splitlines()
    assert lines[0] == "# schema=1"
    header = lines[1].split(",")
    rows = [dict(zip(header, line.split(","))) for line in lines[2:]]
    return header, rows


class TestBounds:
    def test_four_taxa_json(self, capsys):
        assert run_cli(["bounds", "-k", "4", "-t", "1.0", "-q", "0.9"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["m_o"] == payload["m_c"] == payload["m_s"] == payload["m_b"] == 3
        assert all(r >= 1.0 for r in payload["improvement_ratios"].values())

    def test_frozen_cell(self, capsys):
        assert run_cli(["bounds", "-k", "8", "-t", "0.5", "-q", "0.9"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert (payload["m_o"], payload["m_c"], payload["m_s"], payload["m_b"]) == (65, 44, 20, 18)
        assert payload["improvement_ratios"]["m_b"] == pytest.approx(65 / 18)
        assert set(payload["success_probabilities"]["balanced"]) == {str(l) for l in range(2, 7)}

    def test_bad_probability_is_usage_error(self, capsys):
        assert run_cli(["bounds", "-k", "8", "-t", "0.5", "-q", "1.5"]) == 2
        assert "error:" in capsys.readouterr().err

    def test_missing_argument_exits_two(self):
        with pytest.raises(SystemExit) as info:
            run_cli(["bounds", "-k", "8", "-q", "0.9"])
        assert info.value.code == 2


class TestSweep:
    def test_grid_layout_and_chain(self, capsys):
        assert run_cli(["sweep", "-k", "6,8,10", "-t", "0.2,0.5,1.0",
                        "-q", "0.9", "--threads", "1"]) == 0
        header, rows = parse_csv(capsys.readouterr().out)
        assert header == list(SWEEP_COLUMNS)
        assert len(rows) == 9
        for row in rows:
            assert row["error"] == ""
            m_o, m_c, m_s, m_b = (int(row[c]) for c in ("m_o", "m_c", "m_s", "m_b"))
            assert m_b <= m_s <= m_c <= m_o
            assert float(row["ratio_b"]) == pytest.approx(m_o / m_b)

    def test_rows_follow_cell_order(self, capsys):
        run_cli(["sweep", "-k", "6,8", "-t", "0.5,1.0", "-q", "0.9", "--threads", "1"])
        _, rows = parse_csv(capsys.readouterr().out)
        cells = [(row["k"], row["t_min"]) for row in rows]
        assert cells == [("6", "0.5"), ("6", "1.0"), ("8", "0.5"), ("8", "1.0")]

    def test_reruns_are_byte_identical(self, tmp_path):
        paths = [tmp_path / name for name in ("a.csv", "b.csv")]
        for path in paths:
            assert run_cli(["sweep", "-k", "5,9", "-t", "0.3,0.7", "-q", "0.5,0.99",
                            "-o", str(path), "--threads", "1"]) == 0
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_thread_count_does_not_change_bytes(self, tmp_path):
        one, two = tmp_path / "one.csv", tmp_path / "two.csv"
        args = ["sweep", "-k", "6,8,10,12", "-t", "0.2,1.0", "-q", "0.9"]
        assert run_cli(args + ["-o", str(one), "--threads", "1"]) == 0
        assert run_cli(args + ["-o", str(two), "--threads", "2"]) == 0
        assert one.read_bytes() == two.read_bytes()

    def test_threads_from_environment(self, tmp_path, monkeypatch, capsys):
        reference = tmp_path / "ref.csv"
        run_cli(["sweep", "-k", "6", "-t", "0.5", "-q", "0.9",
                 "-o", str(reference), "--threads", "1"])
        monkeypatch.setenv("BIPCOVER_THREADS", "2")
        from_env = tmp_path / "env.csv"
        assert run_cli(["sweep", "-k", "6", "-t", "0.5", "-q", "0.9",
                        "-o", str(from_env)]) == 0
        assert from_env.read_bytes() == reference.read_bytes()
        monkeypatch.setenv("BIPCOVER_THREADS", "0")
        assert run_cli(["sweep", "-k", "6", "-t", "0.5", "-q", "0.9"]) == 2
        assert "error:" in capsys.readouterr().err

    def test_partial_failure_keeps_exit_zero(self, capsys):
        # (20, 0.05, 0.99) overflows the inversion bracket; (8, ...) does not
        assert run_cli(["sweep", "-k", "8,20", "-t", "0.05", "-q", "0.99",
                        "--threads", "1"]) == 0
        captured = capsys.readouterr()
        _, rows = parse_csv(captured.out)
        errors = [row["error"] for row in rows]
        assert errors[0] == "" and errors[1].startswith("Overflow")
        assert "1 of 2 sweep cells failed" in captured.err

    def test_total_failure_exits_one(self, capsys):
        assert run_cli(["sweep", "-k", "20", "-t", "0.05", "-q", "0.99",
                        "--threads", "1"]) == 1
        captured = capsys.readouterr()
        _, rows = parse_csv(captured.out)
        assert rows[0]["error"].startswith("Overflow")
        assert "all 1 sweep cells failed" in captured.err

    def test_empty_value_list_is_usage_error(self, capsys):
        assert run_cli(["sweep", "-k", "", "-t", "0.5", "-q", "0.9"]) == 2
        assert "error:" in capsys.readouterr().err


class TestSimulate:
    BASE = ["simulate", "--tree", "caterpillar", "-k", "6", "-t", "0.5",
            "-q", "0.9", "--trials", "200", "--seed", "11", "--threads", "1"]

    def test_row_contents(self, capsys):
        assert run_cli(self.BASE) == 0
        header, rows = parse_csv(capsys.readouterr().out)
        assert header == list(SIMULATE_COLUMNS)
        (row,) = rows
        assert row["tree_kind"] == "caterpillar"
        assert row["error"] == ""
        assert int(row["n_e"]) >= 1
        assert float(row["ratio_b"]) == pytest.approx(int(row["m_b"]) / int(row["n_e"]))
        assert float(row["ratio_o"]) >= float(row["ratio_b"])

    def test_reruns_are_byte_identical(self, tmp_path):
        paths = [tmp_path / name for name in ("a.csv", "b.csv")]
        for path in paths:
            assert run_cli(self.BASE + ["-o", str(path)]) == 0
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_seed_changes_the_outcome_deterministically(self, tmp_path):
        first, second = tmp_path / "s11.csv", tmp_path / "s12.csv"
        run_cli(self.BASE + ["-o", str(first)])
        run_cli(self.BASE[:-3] + ["12", "--threads", "1", "-o", str(second)])
        a, b = parse_csv(first.read_text())[1][0], parse_csv(second.read_text())[1][0]
        assert a["seed"] != b["seed"]

    def test_yule_replicates_use_derived_seeds(self, capsys):
        assert run_cli(["simulate", "--tree", "yule", "-k", "8", "-t", "0.4",
                        "-q", "0.9", "--trials", "150", "--seed", "5",
                        "--replicates", "5", "--threads", "1"]) == 0
        _, rows = parse_csv(capsys.readouterr().out)
        assert len(rows) == 5
        seeds = [int(row["seed"]) for row in rows]
        assert seeds == [derive_seed(5, r, "yule") for r in range(5)]
        assert len(set(seeds)) == 5
        assert all(row["error"] == "" for row in rows)

    def test_newick_input(self, tmp_path, capsys):
        path = tmp_path / "tree.nwk"
        path.write_text(FIVE_TAXON_NEWICK)
        assert run_cli(["simulate", "--newick", str(path), "-q", "0.9",
                        "--trials", "150", "--seed", "3", "--threads", "1"]) == 0
        _, rows = parse_csv(capsys.readouterr().out)
        (row,) = rows
        assert row["tree_kind"] == "newick"
        assert row["k"] == "5"
        assert row["error"] == ""

    def test_newick_taxon_mismatch_is_usage_error(self, tmp_path, capsys):
        path = tmp_path / "tree.nwk"
        path.write_text(FIVE_TAXON_NEWICK)
        assert run_cli(["simulate", "--newick", str(path), "-k", "8",
                        "-q", "0.9", "--trials", "150"]) == 2
        assert "does not match" in capsys.readouterr().err

    def test_missing_tree_choice_is_usage_error(self, capsys):
        assert run_cli(["simulate", "-k", "6", "-t", "0.5", "-q", "0.9"]) == 2
        assert "pick a tree" in capsys.readouterr().err

    def test_replicates_restricted_to_yule(self, capsys):
        assert run_cli(self.BASE + ["--replicates", "3"]) == 2
        assert "yule" in capsys.readouterr().err

    def test_gene_cap_failure_lands_in_error_column(self, capsys):
        assert run_cli(["simulate", "--tree", "caterpillar", "-k", "8", "-t", "0.1",
                        "-q", "0.9", "--trials", "100", "--seed", "1",
                        "--max-genes", "1", "--threads", "1"]) == 0
        _, rows = parse_csv(capsys.readouterr().out)
        assert rows[0]["error"].startswith("CapExceeded")
        assert rows[0]["n_e"] == ""


class TestCheck:
    def test_oracle_suite_passes(self, capsys):
        assert run_cli(["check", "oracles"]) == 0
        out = capsys.readouterr().out
        lines = out.strip().splitlines()
        assert all(line.startswith("PASS") for line in lines[:-1])
        assert lines[-1].endswith("passed, 0 failed")

    def test_unknown_suite_rejected_by_parser(self):
        with pytest.raises(SystemExit) as info:
            run_cli(["check", "everything"])
        assert info.value.code == 2

    def test_perturbed_transition_function_is_caught(self):
        # a 1e-6 shift must trip the oracle comparisons
        results = run_suite("oracles", g_fn=lambda i, j, T: min(1.0, g(i, j, T) + 1e-6))
        assert any(not r.passed for r in results)


class TestConsoleScript:
    def test_entry_point_runs(self):
        done = subprocess.run(
            ["bipcover", "bounds", "-k", "4", "-t", "1.0", "-q", "0.9"],
            capture_output=True, text=True, timeout=120,
        )
        assert done.returncode == 0
        assert json.loads(done.stdout)["m_b"] == 3

    def test_module_invocation_matches(self):
        done = subprocess.run(
            [sys.executable, "-m", "bipcover.cli", "bounds", "-k", "4",
             "-t", "1.0", "-q", "0.9"],
            capture_output=True, text=True, timeout=120,
        )
        assert done.returncode == 0
        assert json.loads(done.stdout)["m_b"] == 3
