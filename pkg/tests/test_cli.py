"""CLI: config parsing, round-trips, output formats, determinism, error paths."""

import json
import subprocess
import sys

import numpy as np
import pytest

from lvflow import cli
from lvflow.cli import RunConfig, UsageError, parse_config, render, run


def read_csv(path):
    header = []
    with open(path) as fh:
        lines = fh.read().splitlines()
    body = [ln for ln in lines if not ln.startswith("#")]
    header = [ln for ln in lines if ln.startswith("#")]
    cols = body[0].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in body[1:]])
    return header, cols, data


class TestParseConfig:
    def test_thermo_flags(self):
        config = parse_config(["thermo", "--a", "1", "--beta-range", "0.1:5:50"])
        assert config.subcommand == "thermo"
        assert config.parameters["a"] == 1.0
        assert config.parameters["beta_range"] == "0.1:5:50"

    def test_gaussian_grid(self):
        config = parse_config(["gaussian", "--alpha", "1", "--a", "1",
                               "--grid", "-6:6:-6:6:241:241"])
        g = config.grid
        assert (g.x_min, g.x_max, g.nx, g.nk) == (-6.0, 6.0, 241, 241)

    def test_unknown_key_rejected(self):
        with pytest.raises(UsageError):
            parse_config(["thermo", "--bogus", "1"])

    def test_missing_subcommand(self):
        with pytest.raises(UsageError):
            parse_config([])

    def test_config_file_text(self):
        text = """
        # comment line
        subcommand = camouflage
        nu1 = 1.0
        nu2 = 2.0
        zeta = 0.3
        output_dir = /tmp/somewhere
        """
        config = parse_config(text)
        assert config.subcommand == "camouflage"
        assert config.parameters["nu1"] == 1.0
        assert config.output_dir == "/tmp/somewhere"

    def test_bad_config_line(self):
        with pytest.raises(UsageError):
            parse_config("subcommand = thermo\nthis is not a pair\n")

    def test_round_trip(self):
        config = parse_config(["evolve", "--order", "exact", "--a", "5", "--alpha", "0.8",
                               "--y0", "0.5", "--z0", "0.5", "--tau-end", "10",
                               "--seed", "3", "--reproducible"])
        again = parse_config(render(config))
        assert again == config


class TestRunOutputs:
    def test_camouflage_json(self, tmp_path):
        config = parse_config(["camouflage", "--nu1", "1", "--nu2", "2", "--zeta", "0",
                               "--grid", "-6:6:-6:6:121:121",
                               "--output-dir", str(tmp_path), "--reproducible"])
        assert run(config) == 0
        payload = json.loads((tmp_path / "camouflage_check.json").read_text())
        assert payload["tuned"] is True
        assert payload["max_divJ"] <= 1e-12

    def test_camouflage_detuned(self, tmp_path):
        config = parse_config(["camouflage", "--nu1", "1", "--nu2", "2", "--zeta", "0",
                               "--detune", "1.1", "--grid", "-6:6:-6:6:121:121",
                               "--output-dir", str(tmp_path), "--reproducible"])
        assert run(config) == 0
        payload = json.loads((tmp_path / "camouflage_check.json").read_text())
        assert payload["tuned"] is False
        assert payload["max_divJ"] > 1e-3

    def test_thermo_scan_csv(self, tmp_path):
        config = parse_config(["thermo", "--a", "1", "--beta-range", "0.5:2:4",
                               "--output-dir", str(tmp_path), "--reproducible"])
        assert run(config) == 0
        header, cols, data = read_csv(tmp_path / "thermo_scan_a1.csv")
        assert cols == ["beta", "Z0", "ZST", "E0", "EST", "C0", "CST"]
        assert data.shape == (4, 7)
        assert any("parameters" in h for h in header)
        # Z0(beta = 1, a = 1) row equals 1
        row = data[np.isclose(data[:, 0], 1.0)][0]
        assert row[1] == pytest.approx(1.0, rel=1e-12)

    def test_thermo_scan_past_guard_gives_nan_columns(self, tmp_path):
        # corrected columns turn NaN where a beta^2 >= 24 instead of crashing
        config = parse_config(["thermo", "--a", "1", "--beta-range", "5:6:2",
                               "--output-dir", str(tmp_path), "--reproducible"])
        assert run(config) == 0
        _, cols, data = read_csv(tmp_path / "thermo_scan_a1.csv")
        assert np.all(np.isnan(data[:, cols.index("ZST")]))
        assert np.all(np.isfinite(data[:, cols.index("Z0")]))

    def test_thermo_field_csv(self, tmp_path):
        config = parse_config(["thermo", "--a", "1", "--field", "--beta", "1",
                               "--grid", "-1:1:-1:1:21:21",
                               "--output-dir", str(tmp_path), "--reproducible"])
        assert run(config) == 0
        _, cols, data = read_csv(tmp_path / "thermo_field_a1_beta1.csv")
        assert cols == ["x", "k", "W", "Jx", "Jk", "divJ", "divW_quantifier"]
        assert data.shape == (441, 7)

    def test_gaussian_outputs(self, tmp_path):
        config = parse_config(["gaussian", "--alpha", "1", "--a", "1",
                               "--grid", "-3:3:-3:3:61:61",
                               "--output-dir", str(tmp_path), "--reproducible"])
        assert run(config) == 0
        _, cols, data = read_csv(tmp_path / "gaussian_field_alpha1_a1.csv")
        assert cols == ["x", "k", "W", "Jx", "Jk", "divJ"]
        payload = json.loads((tmp_path / "gaussian_topology_alpha1_a1.json").read_text())
        kinds = {rec["type"] for rec in payload["records"]}
        assert "stagnation" in kinds

    def test_classical_levelsets(self, tmp_path):
        config = parse_config(["classical", "--a", "1", "--eps", "3,2.5",
                               "--grid", "-6:6:-6:6:121:121",
                               "--output-dir", str(tmp_path), "--reproducible"])
        assert run(config) == 0
        for eps in ("3", "2.5"):
            _, cols, data = read_csv(tmp_path / f"levelset_eps{eps}.csv")
            assert cols == ["T", "x", "k", "y", "z", "H"]
            assert np.max(np.abs(data[:, 5] - float(eps))) < 0.05
            _, cols, data = read_csv(tmp_path / f"orbit_eps{eps}.csv")
            assert np.max(np.abs(data[:, 5] - float(eps))) < 1e-9

    def test_evolve_outputs(self, tmp_path):
        config = parse_config(["evolve", "--order", "alpha2", "--a", "1", "--alpha", "0.8",
                               "--y0", "0.9", "--z0", "0.9", "--tau-end", "5", "--dt", "0.001",
                               "--output-dir", str(tmp_path), "--reproducible"])
        assert run(config) == 0
        payload = json.loads((tmp_path / "stability_alpha2_a1.json").read_text())
        assert payload["classification"] == "center-candidate"
        assert payload["equilibrium"][0] == pytest.approx(1 / (1 + 0.64 / 12), abs=1e-9)

    def test_determinism(self, tmp_path):
        argv = ["camouflage", "--nu1", "1.1", "--nu2", "0.7", "--zeta", "0.3",
                "--grid", "-6:6:-6:6:61:61", "--reproducible"]
        d1, d2 = tmp_path / "one", tmp_path / "two"
        for d in (d1, d2):
            run(parse_config(argv + ["--output-dir", str(d)]))
        assert (d1 / "camouflage_check.json").read_bytes() == \
               (d2 / "camouflage_check.json").read_bytes()

    def test_domain_error_payload(self, tmp_path, capsys):
        # beta range crossing the perturbative boundary in --field mode
        config = parse_config(["thermo", "--a", "1", "--field", "--beta", "5",
                               "--grid", "-1:1:-1:1:11:11",
                               "--output-dir", str(tmp_path), "--reproducible"])
        status = run(config)
        assert status == 1
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "PerturbativeDomainError"


class TestEntryPoint:
    def test_selftest_subcommand(self, capsys):
        assert cli.main(["specfun-selftest"]) == 0
        out = capsys.readouterr().out
        assert out.count("PASS") == 6

    def test_usage_error_exit_code(self, capsys):
        assert cli.main(["thermo", "--bogus", "1"]) == 2
        # argparse prints its usage text first; the JSON record is the last line
        last = capsys.readouterr().err.strip().splitlines()[-1]
        err = json.loads(last)
        assert err["error"] == "UsageError"

    def test_console_script(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "lvflow.cli", "camouflage", "--nu1", "1", "--nu2", "2",
             "--zeta", "0", "--grid", "-6:6:-6:6:31:31",
             "--output-dir", str(tmp_path), "--reproducible"],
            capture_output=True, text=True)
        assert proc.returncode == 0
        assert "camouflage_check.json" in proc.stdout
