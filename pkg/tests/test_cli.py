import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diffqos import Budget, FocMode, Scenario, UserProfile
from diffqos.cli import main
from diffqos.csvio import (
    ParseError,
    dump_bids,
    dump_scenario,
    fmt,
    parse_bids,
    parse_scenario,
    read_round,
)

from conftest import CASE1_BIDS, CASE2_THROUGHPUTS, CASE3_BIDS, SCENARIO_DIR


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def column(text, name):
    rows, _ = read_round(text)
    idx = ["id", "bid", "power", "throughput", "utility"].index(name)
    return [float(r[idx]) for r in rows]


class TestParsing:
    def test_options(self):
        s = parse_scenario("# budget=2.5\n# foc_mode=exact_log2\nid,v,q,b\n0,1,2,1.5\n")
        assert s.budget == Budget(2.5)
        assert s.foc_mode is FocMode.EXACT_LOG2

    def test_defaults(self):
        s = parse_scenario("id,v,q,b\n1,1,2,1.5\n0,2,2,1.5\n")
        assert s.budget.phi == 1.0
        assert s.foc_mode is FocMode.PAPER_FOC
        assert [u.v for u in s.users] == [2.0, 1.0]

    @pytest.mark.parametrize("text", [
        "",
        "id,v,q,b\n",
        "id,v,q\n0,1,2\n",
        "id,v,q,b\n0,1,2\n",
        "id,v,q,b\n0,one,2,1\n",
        "id,v,q,b\n0,1,-2,1\n",
        "id,v,q,b\n1,1,2,1\n",
        "# budget=0\nid,v,q,b\n0,1,2,1\n",
        "# foc_mode=newton\nid,v,q,b\n0,1,2,1\n",
        "# colour=blue\nid,v,q,b\n0,1,2,1\n",
    ])
    def test_bad_scenarios(self, text):
        with pytest.raises(ParseError):
            parse_scenario(text)

    def test_bad_bids(self):
        with pytest.raises(ParseError):
            parse_bids("id,c\n0,-1\n")
        with pytest.raises(ParseError):
            parse_bids("id,c\n0,1\n0,2\n")

    def test_fmt(self):
        assert fmt(0.123456789) == "0.123457"
        assert fmt(-0.0) == "0"
        assert fmt(1234567.0) == "1.23457e+06"

    @settings(max_examples=100, deadline=None)
    @given(
        rows=st.lists(st.tuples(*[st.floats(1e-6, 1e6, allow_nan=False)] * 3), min_size=1, max_size=12),
        phi=st.floats(1e-3, 1e3),
        mode=st.sampled_from(list(FocMode)),
    )
    def test_scenario_roundtrip(self, rows, phi, mode):
        s = Scenario(tuple(UserProfile(i, *r) for i, r in enumerate(rows)), Budget(phi), mode)
        assert parse_scenario(dump_scenario(s)) == s

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(0, 1e6, allow_nan=False), min_size=1, max_size=12))
    def test_bids_roundtrip(self, bids):
        assert parse_bids(dump_bids(bids)) == dict(enumerate(bids))


class TestAllocate:
    def test_case2(self, capsys):
        code, out, _ = run(capsys, "allocate", SCENARIO_DIR / "case2.csv", SCENARIO_DIR / "case2_bids.csv")
        assert code == 0
        np.testing.assert_allclose(column(out, "throughput"), CASE2_THROUGHPUTS, atol=0.01)
        _, summary = read_round(out)
        assert float(summary[0]) == pytest.approx(0.7005, abs=1e-4)

    def test_empty_users(self, capsys, tmp_path):
        (tmp_path / "s.csv").write_text("id,v,q,b\n")
        code, _, err = run(capsys, "allocate", tmp_path / "s.csv", SCENARIO_DIR / "case2_bids.csv")
        assert code == 2
        assert "parse error" in err

    def test_missing_file(self, capsys, tmp_path):
        code, _, _ = run(capsys, "allocate", tmp_path / "nope.csv", SCENARIO_DIR / "case2_bids.csv")
        assert code == 2

    def test_bid_count_mismatch(self, capsys, tmp_path):
        (tmp_path / "b.csv").write_text("id,c\n0,0.5\n1,0.5\n")
        code, _, err = run(capsys, "allocate", SCENARIO_DIR / "case2.csv", tmp_path / "b.csv")
        assert code == 3
        assert "mismatch" in err

    def test_output_flag(self, capsys, tmp_path):
        target = tmp_path / "out.csv"
        code, out, _ = run(capsys, "-o", target, "allocate", SCENARIO_DIR / "case2.csv",
                           SCENARIO_DIR / "case2_bids.csv")
        assert code == 0 and out == ""
        assert target.read_text().startswith("id,bid,power,throughput,utility\n")


class TestSimulate:
    def test_case1(self, capsys):
        code, out, _ = run(capsys, "simulate", SCENARIO_DIR / "case1.csv")
        assert code == 0
        np.testing.assert_allclose(column(out, "bid"), CASE1_BIDS, atol=0.01)

    def test_case3(self, capsys):
        code, out, _ = run(capsys, "simulate", SCENARIO_DIR / "case3.csv")
        np.testing.assert_allclose(column(out, "bid"), CASE3_BIDS, atol=0.01)

    def test_flat_auto(self, capsys):
        code, out, _ = run(capsys, "simulate", SCENARIO_DIR / "case2.csv", "--flat", "auto")
        assert code == 0
        diff_text, flat_text = out.split("# flat_rate")
        _, diff_summary = read_round(diff_text)
        _, flat_summary = read_round(flat_text.split("\n", 1)[1])
        assert float(flat_summary[2]) <= float(diff_summary[2])

    def test_flat_bad_value(self, capsys):
        code, _, _ = run(capsys, "simulate", SCENARIO_DIR / "case2.csv", "--flat", "cheap")
        assert code == 2

    def test_mode_override(self, capsys):
        _, paper, _ = run(capsys, "simulate", SCENARIO_DIR / "case3.csv")
        _, exact, _ = run(capsys, "simulate", SCENARIO_DIR / "case3.csv", "--foc-mode", "exact_log2")
        assert column(paper, "bid") != column(exact, "bid")


class TestSweep:
    def test_rows(self, capsys):
        code, out, _ = run(capsys, "sweep", "--reps", "2", "--seed", "3", "--users", "4")
        lines = out.strip().splitlines()
        assert code == 0
        assert lines[0] == "R,mean_sw_differential,mean_sw_flat,gap"
        assert len(lines) == 7

    def test_repeatable(self, capsys):
        _, a, _ = run(capsys, "sweep", "--reps", "1", "--R", "1", "--seed", "9")
        _, b, _ = run(capsys, "sweep", "--reps", "1", "--R", "1", "--seed", "9")
        assert a == b

    @pytest.mark.parametrize("flags", [["--reps", "0"], ["--R", "1,x"], ["--R", "-1"], ["--users", "two"],
                                       ["--seed", "-3"], ["--b", "0"]])
    def test_invalid_flags(self, capsys, flags):
        assert main(["sweep", *flags]) == 2


class TestVerify:
    @pytest.mark.parametrize("case", [1, 2, 3])
    def test_cases_with_solved_bids(self, capsys, case):
        code, out, _ = run(capsys, "verify", SCENARIO_DIR / f"case{case}.csv")
        assert code == 0, out
        assert out.strip().endswith("verify: pass")

    @pytest.mark.parametrize("case", [1, 2, 3])
    def test_cases_with_bid_files(self, capsys, case):
        code, _, _ = run(capsys, "verify", SCENARIO_DIR / f"case{case}.csv", SCENARIO_DIR / f"case{case}_bids.csv")
        assert code == 0

    def test_corrupted_powers(self, capsys, tmp_path):
        (tmp_path / "p.csv").write_text("id,p\n0,0.3\n1,0.2\n2,0.25\n3,0.25\n")
        code, out, _ = run(capsys, "verify", SCENARIO_DIR / "case2.csv", SCENARIO_DIR / "case2_bids.csv",
                           "--powers", tmp_path / "p.csv")
        assert code == 1
        assert "FAIL" in out

    def test_single_user(self, capsys, tmp_path):
        (tmp_path / "s.csv").write_text("id,v,q,b\n0,1,2,3\n")
        code, _, _ = run(capsys, "verify", tmp_path / "s.csv")
        assert code == 0


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "diffqos", "simulate", str(SCENARIO_DIR / "case1.csv")],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.startswith("id,bid,power,throughput,utility")
