import csv
import json
import math

import numpy as np
import pytest

from logtrop.cli import GridSpec, RunConfig, ConfigError, main
from logtrop.weights import WeightSpec


@pytest.fixture
def parabola_file(tmp_path):
    path = tmp_path / "parabola.json"
    path.write_text(json.dumps({"family": "tropical",
                                "terms": [{"slope": k, "intercept": -float(k * k)}
                                          for k in range(200)]}))
    return path


class TestConfig:
    def test_grid_parse(self):
        assert GridSpec.parse("1:10:1000") == GridSpec(1.0, 10.0, 1000)

    @pytest.mark.parametrize("text", ["1:10", "1:10:1", "5:1:10", "a:b:c"])
    def test_bad_grid(self, text):
        with pytest.raises(ConfigError):
            GridSpec.parse(text)

    def test_h_invariant(self):
        with pytest.raises(ConfigError, match="h must be ≥ 4"):
            RunConfig(WeightSpec.parse("log_power:alpha=2"), h=3.0)


class TestClassify:
    @pytest.mark.parametrize("spec,verdict", [("log_power:alpha=2.5", "tropical_evidence"),
                                              ("monomial:m=3", "non_rapid_polynomial"),
                                              ("log_power:alpha=1.5", "non_tropical_evidence")])
    def test_verdicts(self, tmp_path, spec, verdict):
        out = tmp_path / "report.json"
        assert main(["classify", "--weight", spec, "--out", str(out)]) == 0
        assert json.loads(out.read_text())["verdict"] == verdict

    def test_invalid_spec(self, tmp_path, capsys):
        out = tmp_path / "report.json"
        assert main(["classify", "--weight", "log_power:alpha=0.5", "--out", str(out)]) == 1
        assert not out.exists()
        assert "alpha > 1" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["classify", "--weight", str(tmp_path / "nope.json")]) == 1

    def test_csv_gaps(self, tmp_path):
        out = tmp_path / "gaps.csv"
        assert main(["classify", "--weight", "log_power:alpha=2", "--out", str(out)]) == 0
        rows = list(csv.reader(out.open()))
        assert rows[0] == ["n", "a_n", "d_n", "h_n"]
        assert float(rows[5][3]) == pytest.approx(1 / 16, abs=1e-9)


class TestBuild:
    def test_parabola_file(self, tmp_path, parabola_file):
        out = tmp_path / "run"
        assert main(["build", "--weight", str(parabola_file), "--kmax", "12",
                     "--out", str(out)]) == 0
        chain = json.loads((out / "chain.json").read_text())
        assert [t["slope"] for t in chain["terms"]] == [3 * k for k in range(12)]
        assert chain["breakpoints"][:3] == [3.0, 9.0, 15.0]
        series = json.loads((out / "series.json").read_text())
        assert [e["exponent"] for e in series["G"][0]["entries"]] == [0, 9, 18, 27]

    def test_log_power_certificate(self, tmp_path):
        out = tmp_path / "run"
        assert main(["build", "--weight", "log_power:alpha=2.5", "--out", str(out)]) == 0
        cert = json.loads((out / "certificate.json").read_text())
        assert cert["passed"]
        assert cert["c_low"] >= math.log(0.5) - 4 and cert["c_high"] <= math.log(6)
        assert cert["seed"] == 0 and cert["grid"]["phases"] == 64
        info = json.loads((out / "map.json").read_text())
        assert info["arity"] == 3 and "finite grid" in info["caveat"]

    def test_h_three_rejected(self, tmp_path, capsys):
        out = tmp_path / "run"
        assert main(["build", "--weight", "log_power:alpha=2.5", "--h", "3",
                     "--out", str(out)]) == 1
        assert "h must be ≥ 4" in capsys.readouterr().err
        assert not out.exists()

    def test_byte_identical(self, tmp_path):
        args = ["build", "--weight", "exp_power:beta=1", "--seed", "7", "--phases", "16",
                "--format", "csv"]
        assert main(args + ["--out", str(tmp_path / "a")]) == 0
        assert main(args + ["--out", str(tmp_path / "b")]) == 0
        for name in ("chain.json", "series.json", "certificate.json", "map.json", "plot.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_seed_changes_phases(self, tmp_path):
        for seed in ("1", "2"):
            assert main(["build", "--weight", "log_power:alpha=2.5", "--seed", seed,
                         "--phases", "8", "--out", str(tmp_path / seed)]) == 0
        assert (tmp_path / "1" / "certificate.json").read_bytes() != \
            (tmp_path / "2" / "certificate.json").read_bytes()

    def test_verification_failure_exit(self, tmp_path):
        # grid far below the floor is fine, but a grid past the chain's reach
        # breaks the truncation check and is rejected without output
        out = tmp_path / "run"
        code = main(["build", "--weight", "log_power:alpha=2.5", "--kmax", "8",
                     "--grid", "1:1000:50", "--out", str(out)])
        assert code == 1 and not out.exists()

    def test_refuses_non_tropical(self, tmp_path):
        out = tmp_path / "run"
        assert main(["build", "--weight", "log_power:alpha=1.5", "--out", str(out)]) == 2
        assert not out.exists()

    def test_force_reports_failure(self, tmp_path):
        out = tmp_path / "run"
        code = main(["build", "--weight", "log_power:alpha=1.5", "--force", "--kmax", "200",
                     "--out", str(out)])
        cert = json.loads((out / "certificate.json").read_text())
        assert code == 3 and not cert["passed"] and cert["violations"]


class TestPlotData:
    def test_log_power_square(self, tmp_path):
        out = tmp_path / "p.csv"
        assert main(["export-plotdata", "--weight", "log_power:alpha=2", "--grid", "1:10:1000",
                     "--out", str(out)]) == 0
        rows = list(csv.reader(out.open()))
        assert rows[0] == ["x", "phi", "minorant", "chain_envelope"]
        data = np.array(rows[1:], dtype=float)
        assert data.shape == (1000, 4)
        np.testing.assert_allclose(data[:, 1], data[:, 0] ** 2, rtol=1e-15)
        assert all(len(r[1].replace("-", "").replace(".", "").lstrip("0")) <= 17 for r in rows[1:])

    def test_tropical_columns_equal(self, tmp_path, parabola_file):
        out = tmp_path / "p.csv"
        assert main(["export-plotdata", "--weight", str(parabola_file), "--grid=-2:60:500",
                     "--out", str(out)]) == 0
        data = np.loadtxt(out, delimiter=",", skiprows=1)
        np.testing.assert_array_equal(data[:, 1], data[:, 2])

    @pytest.mark.parametrize("spec", ["log_power:alpha=2.5", "exp_power:beta=1"])
    def test_chain_within_h(self, tmp_path, spec):
        out = tmp_path / "p.csv"
        assert main(["export-plotdata", "--weight", spec, "--out", str(out)]) == 0
        data = np.loadtxt(out, delimiter=",", skiprows=1)
        assert np.all(data[:, 3] <= data[:, 1] + 1e-12 * np.maximum(1, np.abs(data[:, 1])))
        assert np.all(data[:, 3] >= data[:, 1] - 4.0)

    def test_json_format(self, tmp_path):
        out = tmp_path / "p.json"
        assert main(["export-plotdata", "--weight", "log_power:alpha=2", "--grid", "1:2:5",
                     "--out", str(out)]) == 0
        assert len(json.loads(out.read_text())["rows"]) == 5


def test_module_entry_point():
    import subprocess
    import sys
    res = subprocess.run([sys.executable, "-m", "logtrop", "--help"], capture_output=True,
                         text=True)
    assert res.returncode == 0 and "export-plotdata" in res.stdout
