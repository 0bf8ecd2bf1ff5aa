from __future__ import annotations

import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from sparsepc.cli import main
from sparsepc.config import SCHEMA, load_config, parse_config_text
from sparsepc.errors import ConfigError
from sparsepc.indices import MultiIndex
from sparsepc.torus import PeriodicField

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

SMALL_RATES = """\
grid.n = 32
pc.J = 3
pc.ref_size = 60
pc.Ns = [10, 20, 40]
pc.sparsity_Ns = [20, 40, 60]
"""

SMALL_VERIFY = """\
verify.mc_samples = 20000
verify.perturbation_cases = 4
verify.strip_probes = 5
pc.ref_size = 50
pc.Ns = [10, 20, 40]
"""


def write(tmp_path: Path, text: str, name: str = "exp.cfg") -> Path:
    path = tmp_path / name
    path.write_text(text)
    return path


def run(args: list[str], out: Path) -> int:
    return main([*args, "--out", str(out)])


def payloads(out: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.name != "manifest.txt"}


def read_report(out: Path) -> dict[str, str]:
    lines = (out / "report.txt").read_text().splitlines()
    return dict(line.split(": ", 1) for line in lines)


class TestParser:
    def test_values_and_comments(self):
        values, lines = parse_config_text(
            '# header\nexperiment.name = "a # b"  # trailing\n\ngrid.n = 32\nweights.b = [1, 0.5]\nrhs.kind = cos\n'
        )
        assert values == {"experiment.name": "a # b", "grid.n": 32, "weights.b": [1.0, 0.5], "rhs.kind": "cos"}
        assert lines == {"experiment.name": 2, "grid.n": 4, "weights.b": 5, "rhs.kind": 6}

    @pytest.mark.parametrize(
        "text,key,line",
        [
            ("grid.n = 32\ngrid.size = 4\n", "grid.size", 2),
            ("grid.n = 32\n\ngrid.n = 64\n", "grid.n", 3),
            ("grid.n = 3.5\n", "grid.n", 1),
            ("solver.dealias = 1\n", "solver.dealias", 1),
            ("pc.Ns = [1, 2.5]\n", "pc.Ns", 1),
            ("grid.n = [\n", "grid.n", 1),
        ],
    )
    def test_errors_carry_line_and_key(self, text, key, line):
        with pytest.raises(ConfigError) as info:
            parse_config_text(text)
        assert info.value.key == key and info.value.line == line
        assert f"line {line}" in str(info.value) and key in str(info.value)

    def test_malformed_line(self):
        with pytest.raises(ConfigError) as info:
            parse_config_text("grid.n 32\n")
        assert info.value.line == 1

    def test_defaults_filled(self, tmp_path):
        cfg = load_config(write(tmp_path, "grid.n = 32\n"))
        assert set(cfg.values) == set(SCHEMA)
        assert cfg["grid.n"] == 32 and cfg["pc.J"] == 6

    def test_seed_override(self, tmp_path):
        path = write(tmp_path, "experiment.seed = 5\n")
        assert load_config(path).seed == 5
        assert load_config(path, seed=2**63).seed == 2**63

    def test_digest_tracks_content(self, tmp_path):
        a = load_config(write(tmp_path, "grid.n = 32\n", "a.cfg"))
        b = load_config(write(tmp_path, "grid.n = 32\n", "b.cfg"))
        c = load_config(write(tmp_path, "grid.n = 64\n", "c.cfg"))
        assert a.digest == b.digest != c.digest

    @pytest.mark.parametrize(
        "text,key",
        [
            ("grid.n = 7\n", "grid.n"),
            ("basis.t = 0.5\n", "basis.t"),
            ("weights.M = 2\n", "weights.M"),
            ('rhs.kind = "square"\n', "rhs.kind"),
            ("pc.Ns = [50, 25]\n", "pc.Ns"),
            ('weights.kind = "explicit"\n', "weights.b"),
        ],
    )
    def test_validation_names_key(self, tmp_path, text, key):
        with pytest.raises(ConfigError) as info:
            load_config(write(tmp_path, text))
        assert info.value.key == key

    def test_shipped_configs_load(self):
        for path in sorted(CONFIGS.glob("*.cfg")):
            load_config(path)


class TestCommands:
    def test_config_error_exit_code(self, tmp_path, capsys):
        path = write(tmp_path, "grid.n = 32\nbogus.key = 1\n")
        assert run(["solve", "--config", str(path)], tmp_path / "out") == 3
        err = capsys.readouterr().err
        assert "line 2" in err and "bogus.key" in err

    def test_repeated_key_exit_code(self, tmp_path):
        path = write(tmp_path, "grid.n = 32\ngrid.n = 64\n")
        assert run(["solve", "--config", str(path)], tmp_path / "out") == 3

    def test_indexset_toy(self, tmp_path):
        out = tmp_path / "out"
        assert run(["indexset", "--config", str(CONFIGS / "toy_indexset.cfg")], out) == 0
        lines = (out / "lambda.csv").read_text().splitlines()
        assert lines[0] == "position,nu,c_weight"
        members = [MultiIndex.parse(line.split(",")[1]) for line in lines[1:]]
        assert [m.dense(2) for m in members] == [(0, 0), (1, 0), (0, 1), (2, 0)]
        assert [float(line.split(",")[2]) for line in lines[1:]] == [1.0, 4.0, 9.0, 16.0]
        report = read_report(out)
        assert report["status"] == "pass" and report["m_lambda"] == "2" and report["d_lambda"] == "1"
        manifest = (out / "manifest.txt").read_text()
        assert "config_sha256: " in manifest and "seed: 0" in manifest and "numpy: " in manifest

    def test_solve_peak(self, tmp_path):
        out = tmp_path / "out"
        assert run(["solve", "--config", str(CONFIGS / "solve.cfg")], out) == 0
        rows = (out / "field.csv").read_text().splitlines()
        assert rows[0] == "x,re,im"
        re = np.array([float(r.split(",")[1]) for r in rows[1:]])
        assert np.max(np.abs(re)) == pytest.approx(0.0253303, abs=5e-8)
        field = PeriodicField.from_bytes((out / "field.bin").read_bytes())
        np.testing.assert_array_equal(field.real, re)

    def test_identity_default_battery(self, tmp_path):
        out = tmp_path / "out"
        assert run(["identity", "--config", str(CONFIGS / "identity.cfg")], out) == 0
        report = read_report(out)
        assert report["case.y1^2"].startswith("M=2 lhs=9 rhs=9 ")
        assert float(report["worst_relative_difference"]) <= 1e-10
        assert sum(key.startswith("case.random") for key in report) == 50

    def test_rates_small(self, tmp_path):
        out = tmp_path / "out"
        code = run(["rates", "--config", str(write(tmp_path, SMALL_RATES))], out)
        report = read_report(out)
        assert code == (0 if report["status"] == "pass" else 2)
        assert {"lambda.csv", "coeffs.csv", "errors.csv", "report.txt", "manifest.txt"} <= {p.name for p in out.iterdir()}
        assert (out / "coeffs.csv").read_text().count("\n") == 61
        assert (out / "errors.csv").read_text().splitlines()[0] == "N,error,m_lambda,d_lambda"
        assert "slope" in report and "summability.weighted_sum" in report

    def test_violation_exit_code(self, tmp_path):
        # a slope bound nothing can meet turns the report into a property violation
        out = tmp_path / "out"
        assert run(["rates", "--config", str(write(tmp_path, SMALL_RATES + "pc.max_slope = -50.0\n"))], out) == 2
        assert read_report(out)["slope_within_bound"] == "FAIL"

    def test_numerical_precondition_exit_code(self, tmp_path):
        out = tmp_path / "out"
        path = write(tmp_path, "verify.moment_b = [1.0]\nverify.moment_alpha = 0.5\n" + SMALL_VERIFY)
        assert run(["verify", "--config", str(path)], out) == 3
        assert "precondition failed" in read_report(out)["moment.closed"]

    def test_verify_small(self, tmp_path):
        out = tmp_path / "out"
        assert run(["verify", "--config", str(write(tmp_path, SMALL_VERIFY))], out) == 0
        report = read_report(out)
        assert report["perturbation.violations"] == "0" and report["moment.agree_3se"] == "pass"

    @pytest.mark.parametrize(
        "command,text",
        [("rates", SMALL_RATES), ("indexset", ""), ("solve", "solve.y = [0.5, -1.0]\n"), ("verify", SMALL_VERIFY), ("identity", "identity.cases = 10\n")],
    )
    def test_reruns_are_byte_identical(self, tmp_path, command, text):
        path = write(tmp_path, text)
        run([command, "--config", str(path)], tmp_path / "a")
        run([command, "--config", str(path)], tmp_path / "b")
        assert payloads(tmp_path / "a") == payloads(tmp_path / "b")
        strip = lambda p: [l for l in p.read_text().splitlines() if not l.startswith("timestamp")]  # noqa: E731
        assert strip(tmp_path / "a" / "manifest.txt") == strip(tmp_path / "b" / "manifest.txt")

    def test_jobs_do_not_change_payloads(self, tmp_path):
        path = write(tmp_path, SMALL_RATES + "estimator.kind = mc\nestimator.samples = 5000\n")
        main(["rates", "--config", str(path), "--out", str(tmp_path / "a"), "--jobs", "1"])
        main(["rates", "--config", str(path), "--out", str(tmp_path / "b"), "--jobs", "3"])
        a, b = payloads(tmp_path / "a"), payloads(tmp_path / "b")
        for name in ("coeffs.csv", "errors.csv", "lambda.csv"):
            assert a[name] == b[name]
        assert "jobs: 3" in (tmp_path / "b" / "manifest.txt").read_text()

    def test_seed_flag_changes_monte_carlo(self, tmp_path):
        path = write(tmp_path, SMALL_RATES + "estimator.kind = mc\nestimator.samples = 500\n")
        main(["rates", "--config", str(path), "--out", str(tmp_path / "a")])
        main(["rates", "--config", str(path), "--out", str(tmp_path / "b"), "--seed", "7"])
        assert (tmp_path / "a" / "coeffs.csv").read_bytes() != (tmp_path / "b" / "coeffs.csv").read_bytes()
        assert "seed: 7" in (tmp_path / "b" / "manifest.txt").read_text()

    def test_bad_flags(self, tmp_path):
        assert main(["solve", "--config", str(CONFIGS / "solve.cfg"), "--jobs", "0", "--out", str(tmp_path)]) == 3
        with pytest.raises(SystemExit):
            main(["solve", "--config", str(CONFIGS / "solve.cfg"), "--seed", "-1"])
        with pytest.raises(SystemExit):
            main(["plot", "--config", str(CONFIGS / "solve.cfg")])

    def test_module_entry_point(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "sparsepc", "indexset", "--config", str(CONFIGS / "toy_indexset.cfg"), "--out", str(tmp_path)],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert "status: pass" in proc.stdout
