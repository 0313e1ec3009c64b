import csv
import io
import pathlib
import subprocess
import sys
import time

import numpy as np
import pytest

from nnfunctionals.cli import InputError, main, read_csv_points

ROOT = pathlib.Path(__file__).resolve().parents[1]


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


def records(text):
    return [r for r in csv.reader(ln for ln in text.splitlines() if not ln.startswith("#"))]


def write(path, rows, header=None):
    with open(path, "w") as fh:
        if header:
            fh.write(header + "\n")
        for r in np.atleast_2d(rows).reshape(len(rows), -1):
            fh.write(",".join(repr(float(v)) for v in r) + "\n")
    return str(path)


@pytest.fixture
def xy(tmp_path):
    return write(tmp_path / "x.csv", [0.0, 1.0, 3.0], header="x"), write(tmp_path / "y.csv", [0.5, 2.0])


class TestEstimate:
    def test_worked_example(self, xy):
        code, out = run("estimate", "--x", xy[0], "--y", xy[1], "--functional", "intfg", "--kX", "1", "--kY", "1")
        assert code == 0
        vals = dict(records(out)[1:])
        assert float(vals["estimate"]) == pytest.approx(0.4166667, abs=1e-7)
        assert vals["kX"] == "1" and vals["kY"] == "1"

    def test_ci_fields(self, tmp_path, rng):
        x = write(tmp_path / "x.csv", rng.normal(size=(300, 1)))
        y = write(tmp_path / "y.csv", rng.normal(1, 1, size=(300, 1)))
        code, out = run("estimate", "--x", x, "--y", y, "--functional", "kl", "--weighting", "class", "--ci-level", "0.9")
        assert code == 0
        vals = dict(records(out)[1:])
        lo, est, hi = float(vals["ci_lower"]), float(vals["estimate"]), float(vals["ci_upper"])
        assert lo < est < hi and 0.2 < est < 0.8
        assert vals["ci_level"] == "0.9"
        assert all(len(r) == 2 for r in records(out))

    def test_one_sample(self, tmp_path, rng):
        x = write(tmp_path / "x.csv", rng.normal(size=(200, 1)))
        code, out = run("estimate", "--x", x, "--functional", "shannon", "--k", "4", "--debias")
        assert code == 0 and float(dict(records(out)[1:])["estimate"]) == pytest.approx(1.419, abs=0.2)

    def test_identical_samples_fail_kl(self, tmp_path):
        x = write(tmp_path / "x.csv", [0.0, 1.0, 2.0, 3.0])
        code, _ = run("estimate", "--x", x, "--y", x, "--functional", "kl", "--kX", "1", "--kY", "1")
        assert code == 3

    def test_missing_file(self, tmp_path):
        code, _ = run("estimate", "--x", str(tmp_path / "nope.csv"), "--functional", "shannon")
        assert code == 2

    def test_missing_y(self, xy):
        assert run("estimate", "--x", xy[0], "--functional", "kl")[0] == 2

    def test_bad_k(self, xy):
        assert run("estimate", "--x", xy[0], "--y", xy[1], "--functional", "kl", "--kX", "0")[0] == 2


class TestReadCsv:
    def test_round_trip(self, tmp_path, rng):
        pts = rng.normal(size=(50, 3)) * 10.0 ** rng.integers(-5, 5, size=(50, 3))
        got = read_csv_points(write(tmp_path / "p.csv", pts, header="a,b,c"))
        assert np.allclose(got, pts, rtol=1e-15, atol=0)

    def test_ragged(self, tmp_path):
        p = tmp_path / "r.csv"
        p.write_text("1,2\n3\n")
        with pytest.raises(InputError, match=":2:"):
            read_csv_points(str(p))

    def test_non_numeric(self, tmp_path):
        p = tmp_path / "r.csv"
        p.write_text("1\n2\nabc\n")
        with pytest.raises(InputError, match=":3:"):
            read_csv_points(str(p))

    def test_non_finite(self, tmp_path):
        p = tmp_path / "r.csv"
        p.write_text("1\nnan\n")
        with pytest.raises(InputError):
            read_csv_points(str(p))


class TestWeights:
    def test_example(self):
        code, out = run("weights", "--k", "2", "--d", "1", "--c", "0.4")
        assert code == 0
        assert records(out)[0] == ["index", "weight"]
        assert [float(w) for _, w in records(out)[1:]] == pytest.approx([0.5, 0.5], abs=1e-15)

    def test_residual_headers(self):
        _, out = run("weights", "--k", "20", "--d", "2", "--class", "kl")
        res = [float(ln.split("=")[1]) for ln in out.splitlines() if ln.startswith("# residual[")]
        assert res and max(abs(r) for r in res) < 1e-8

    def test_renyi_needs_b(self):
        assert run("weights", "--k", "5", "--d", "1", "--class", "renyi")[0] == 2

    def test_infeasible(self):
        assert run("weights", "--k", "2", "--d", "8", "--order", "3")[0] == 3


class TestDiagnose:
    def test_example(self):
        code, out = run("diagnose", "--d", "1", "--alpha", "5", "--beta", "2", "--lambda1", "0.9",
                        "--lambda2", "0.9", "--gamma", "2", "--kappa1", "0.1", "--kappa2", "0.1")
        assert code == 0
        vals = dict(records(out)[1:])
        assert float(vals["zeta"]) == pytest.approx(0.2622222, abs=1e-7)
        assert float(vals["tau1"]) == pytest.approx(0.2469880, abs=1e-7)

    def test_k_range_rows(self):
        code, out = run("diagnose", "--d", "1", "--alpha", "50", "--beta", "20", "--lambda1", "20",
                        "--lambda2", "20", "--gamma", "2", "--kappa1", "0", "--kappa2", "0",
                        "--beta1", "8", "--beta2", "8", "--m", "10000")
        vals = dict(records(out)[1:])
        assert code == 0 and int(vals["kX_lo"]) <= int(vals["kX_hi"])


class TestSimulate:
    def test_smoke_config_fast(self, tmp_path):
        t0 = time.perf_counter()
        out_path = tmp_path / "out.csv"
        code, _ = run("simulate", str(ROOT / "configs" / "smoke.cfg"), "--output", str(out_path))
        assert code == 0 and time.perf_counter() - t0 < 5.0
        rows = records(out_path.read_text())
        assert rows[0] == ["m", "n", "kX", "kY", "metric", "value", "se"]
        assert {r[4] for r in rows[1:]} == {"mean", "bias", "variance", "mse", "mse_ratio"}

    def test_seed_override(self):
        a = run("simulate", str(ROOT / "configs" / "smoke.cfg"))[1]
        b = run("simulate", str(ROOT / "configs" / "smoke.cfg"), "--seed", "0")[1]
        c = run("simulate", str(ROOT / "configs" / "smoke.cfg"), "--seed", "5")[1]
        assert records(a) == records(b) != records(c)

    def test_bad_config(self, tmp_path):
        p = tmp_path / "bad.cfg"
        p.write_text("f=gaussian:0:1\nbogus=1\n")
        assert run("simulate", str(p))[0] == 2

    def test_bad_workers(self):
        assert run("simulate", str(ROOT / "configs" / "smoke.cfg"), "--workers", "0")[0] == 2


class TestEntryPoint:
    def test_unknown_command(self):
        assert run("frobnicate")[0] == 2

    def test_module_invocation(self):
        proc = subprocess.run([sys.executable, "-m", "nnfunctionals.cli", "--version"], capture_output=True, text=True)
        assert proc.returncode == 0 and "nnfunc" in proc.stdout
