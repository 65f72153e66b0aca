import csv
import io
import json
import math
import subprocess
import sys
from fractions import Fraction

import pytest

from prefkout import __version__
from prefkout.cli import (
    EXIT_BUDGET,
    EXIT_CHECK,
    EXIT_INVALID,
    ConfigError,
    parse_csv_value,
    resolve_alpha,
    run,
)
from prefkout.model import INFINITY


def call(capsys, *argv):
    code = run(list(argv))
    out = capsys.readouterr().out
    return code, out


def rows_csv(text):
    return [{k: parse_csv_value(v) for k, v in r.items()} for r in csv.DictReader(io.StringIO(text))]


class TestAlphaSpec:
    @pytest.mark.parametrize(
        "spec,n,kw,expected",
        [
            ("inf", 10, {}, INFINITY),
            ("3", 10, {}, 3),
            ("3/2", 10, {}, Fraction(3, 2)),
            ("2.5", 10, {}, Fraction(5, 2)),
            ("sqrt(n)", 10_000, {}, 100),
            ("beta*sqrt(n)", 10_000, {"beta": 2.0}, 200),
            ("beta*sqrt(n)", 10, {"beta": 1.0}, math.sqrt(10)),
            ("0.5*sqrt(n)", 100, {}, 5.0),
            ("n^sigma", 10_000, {"sigma": 0.25}, 10.0),
            ("n^1", 17, {}, 17),
            ("n^0.75", 16, {}, 8.0),
        ],
    )
    def test_grammar(self, spec, n, kw, expected):
        got = resolve_alpha(spec, n, **kw)
        if isinstance(expected, float):
            assert got == pytest.approx(expected, rel=1e-12)
        else:
            assert got == expected and type(got) is type(expected)

    @pytest.mark.parametrize("spec,kw", [("beta*sqrt(n)", {}), ("n^sigma", {}), ("-2", {}), ("0", {}), ("abc", {})])
    def test_rejects(self, spec, kw):
        with pytest.raises(ConfigError):
            resolve_alpha(spec, 10, **kw)


class TestSample:
    def test_single_vertex(self, capsys):
        code, out = call(capsys, "sample", "--n", "1", "--k", "2")
        assert code == 0
        body = [line for line in out.splitlines() if not line.startswith("#")]
        assert body == ["1 1 1", "1 2 1"]
        assert out.startswith("# prefkout ") and "seed=0" in out

    def test_same_seed_same_bytes(self, tmp_path):
        a, b = tmp_path / "a.txt", tmp_path / "b.txt"
        for path in (a, b):
            assert run(["sample", "--n", "5", "--k", "3", "--alpha", "3/2", "--samples", "20", "--seed", "9", "--out", str(path)]) == 0
        assert a.read_bytes() == b.read_bytes()
        assert run(["sample", "--n", "5", "--k", "3", "--alpha", "3/2", "--samples", "20", "--seed", "10", "--out", str(b)]) == 0
        assert a.read_bytes() != b.read_bytes()

    def test_frequencies(self, capsys):
        m = 200_000
        code, out = call(capsys, "sample", "--n", "2", "--k", "1", "--alpha", "1", "--samples", str(m), "--seed", "4")
        assert code == 0
        freq = {}
        lines = [line for line in out.splitlines() if not line.startswith("#")]
        for i in range(0, len(lines), 2):
            key = (lines[i].split()[2], lines[i + 1].split()[2])
            freq[key] = freq.get(key, 0) + 1
        expected = {("1", "1"): 1 / 3, ("2", "2"): 1 / 3, ("1", "2"): 1 / 6, ("2", "1"): 1 / 6}
        for key, p in expected.items():
            assert abs(freq[key] / m - p) < 5 * math.sqrt(p * (1 - p) / m)

    def test_json_and_routes(self, capsys):
        for route in ("fixed_order", "random_order", "uniform"):
            code, out = call(capsys, "sample", "--n", "3", "--k", "2", "--samples", "4", "--route", route, "--format", "json")
            assert code == 0
            obj = json.loads(out)
            assert obj["header"]["route"] == route and obj["header"]["version"] == __version__
            assert len(obj["digraphs"]) == 4
            assert all(1 <= t <= 3 for g in obj["digraphs"] for arcs in g for t in arcs)

    def test_unwritable(self, tmp_path):
        assert run(["sample", "--n", "2", "--out", str(tmp_path / "missing" / "x.txt")]) == EXIT_INVALID


class TestExactTV:
    def test_examples(self, capsys):
        code, out = call(capsys, "exact-tv", "--n", "2", "--k", "1", "--alpha", "1")
        assert code == 0
        (row,) = rows_csv(out)
        assert row["exact_tv_full"] == "1/6" and row["exact_tv_X"] == "1/6" and row["mode"] == "rational"
        code, out = call(capsys, "exact-tv", "--n", "1", "--k", "3", "--alpha", "2")
        (row,) = rows_csv(out)
        assert row["exact_tv_full"] == 0 and row["exact_tv_X"] == 0

    def test_sweep_is_monotone(self, capsys):
        alphas = ",".join(str(2**j) for j in range(11))
        code, out = call(capsys, "exact-tv", "--n", "4", "--alpha", alphas, "--format", "json")
        vals = [Fraction(r["exact_tv_full"]) for r in json.loads(out)]
        assert len(vals) == 11 and all(a > b for a, b in zip(vals, vals[1:]))

    def test_extended_mode(self, capsys):
        code, out = call(capsys, "exact-tv", "--n", "3", "--alpha", "beta*sqrt(n)", "--beta", "1", "--format", "json")
        (row,) = json.loads(out)
        assert row["mode"] == "extended" and row["error_bound"] < 1e-50

    def test_budget(self, capsys):
        assert call(capsys, "exact-tv", "--n", "30", "--k", "1")[0] == EXIT_BUDGET
        assert call(capsys, "exact-tv", "--n", "30", "--k", "1", "--budget", "30")[0] == 0


class TestOtherCommands:
    def test_limit(self, capsys):
        code, out = call(capsys, "limit", "--k", "1", "--beta", "1", "--check")
        assert code == 0
        (row,) = rows_csv(out)
        assert abs(row["limit_tv"] - 0.27633) < 1e-5 and row["pass"] is True

    @pytest.mark.parametrize("alpha", ["1", "7/3", "inf", "sqrt(n)"])
    def test_moments_first(self, capsys, alpha):
        code, out = call(capsys, "moments", "--n", "9", "--k", "3", "--alpha", alpha, "--ell", "1", "--format", "json")
        assert code == 0
        assert all(r["exact"] == 3 for r in json.loads(out))

    def test_moments_check(self, capsys):
        code, out = call(capsys, "moments", "--n", "50", "--k", "2", "--alpha", "5", "--samples", "20000", "--check")
        assert code == 0
        assert all(r["pass"] for r in rows_csv(out) if r["pass"] is not None)

    def test_lclt_pass_and_fail(self, capsys):
        args = ["lclt", "--n", "2500", "--samples", "200000", "--seed", "3", "--check"]
        code, out = call(capsys, *args, "--tolerance", "0.2")
        assert code == 0 and rows_csv(out)[0]["pass"] is True
        code, out = call(capsys, *args, "--tolerance", "1e-6")
        assert code == EXIT_CHECK and rows_csv(out)[0]["pass"] is False

    def test_lclt_2d(self, capsys):
        code, out = call(capsys, "lclt", "--n", "400", "--samples", "100000", "--mode", "2d", "--window", "3",
                         "--format", "json")
        (row,) = json.loads(out)
        assert code == 0 and row["parity_violations"] == 0

    def test_threshold_regimes(self, capsys):
        code, out = call(capsys, "threshold", "--n", "1000,10000", "--alpha", "n^0.25", "--samples", "10000")
        rows = rows_csv(out)
        assert code == 0 and [r["n"] for r in rows] == [1000, 10000]
        assert rows[1]["event_gap"] > 0.8
        code, out = call(capsys, "threshold", "--n", "1000,40000", "--alpha", "n^0.75", "--samples", "10000")
        rows = rows_csv(out)
        assert rows[1]["tv_via_f"] < rows[0]["tv_via_f"] < 0.1

    def test_distinguish_and_concentration(self, capsys):
        code, out = call(capsys, "distinguish", "--n", "2000", "--sigma", "0.25", "--samples", "10000")
        (row,) = rows_csv(out)
        assert code == 0 and row["p_unif"] < 0.05
        code, out = call(capsys, "concentration", "--n", "10000", "--power", "1,2", "--samples", "10000")
        rows = rows_csv(out)
        # omega = ln n is a finite window, so allow a few percent outside it
        assert rows[0]["fraction"] == 1.0 and rows[1]["fraction"] >= 0.95


class TestConfigAndDeterminism:
    def test_csv_json_value_identical(self, capsys):
        args = ["threshold", "--n", "1000", "--samples", "10000", "--seed", "2"]
        _, c = call(capsys, *args)
        _, j = call(capsys, *args, "--format", "json")
        # alpha is written as text in both formats; read strings back the same way
        parsed = [{k: parse_csv_value(v) if isinstance(v, str) else v for k, v in r.items()} for r in json.loads(j)]
        assert rows_csv(c) == parsed

    def test_threads_do_not_change_output(self, capsys):
        args = ["threshold", "--n", "2000", "--samples", "20000", "--seed", "5"]
        assert call(capsys, *args, "--threads", "1")[1] == call(capsys, *args, "--threads", "8")[1]

    def test_config_file_and_override(self, capsys, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# experiment\nn = 4\nk=1\nalpha = 2\nformat=json\n")
        code, out = call(capsys, "exact-tv", "--config", str(cfg))
        (row,) = json.loads(out)
        assert code == 0 and row["alpha"] == "2" and row["exact_tv_full"] == "181/1056"
        code, out = call(capsys, "exact-tv", "--config", str(cfg), "--alpha", "1")
        assert json.loads(out)[0]["exact_tv_full"] == "319/1120"
        # same resolved config through flags alone gives the same hash
        _, flags = call(capsys, "exact-tv", "--n", "4", "--k", "1", "--alpha", "2", "--format", "json")
        assert json.loads(flags)[0]["config_hash"] == row["config_hash"]

    def test_bad_config(self, capsys, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("n 4\n")
        assert call(capsys, "exact-tv", "--config", str(cfg))[0] == EXIT_INVALID
        assert call(capsys, "exact-tv", "--config", str(tmp_path / "none.cfg"))[0] == EXIT_INVALID

    @pytest.mark.parametrize(
        "argv",
        [
            ["exact-tv"],
            ["exact-tv", "--n", "2", "--alpha", "-1"],
            ["exact-tv", "--n", "x"],
            ["sample", "--n", "0"],
            ["threshold", "--n", "100", "--samples", "10"],
            ["lclt", "--n", "100", "--samples", "10"],
            ["limit", "--beta", "0"],
            ["nonsense"],
            ["limit", "--format", "text"],
            ["sample", "--n", "2", "--threads", "0"],
        ],
    )
    def test_validation_exit_code(self, capsys, argv):
        assert run(argv) == EXIT_INVALID

    def test_rows_carry_provenance(self, capsys):
        _, out = call(capsys, "limit", "--seed", "17", "--format", "json")
        (row,) = json.loads(out)
        assert row["seed"] == 17 and row["version"] == __version__ and len(row["config_hash"]) == 16

    def test_console_script(self, tmp_path):
        out = tmp_path / "o.csv"
        r = subprocess.run(
            [sys.executable, "-m", "prefkout.cli", "exact-tv", "--n", "2", "--out", str(out)],
            capture_output=True, text=True,
        )
        assert r.returncode == 0
        assert "1/6" in out.read_text()
        assert "finished" in r.stderr and r.stdout == ""
