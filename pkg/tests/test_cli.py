import json
import math
import subprocess
import sys

import numpy as np
import pytest

from stablehull import cli


def _run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestEstimate:
    def test_mean_support_round_trip(self, capsys):
        code, out, _ = _run(capsys, "estimate", "--functional", "mean-support", "--alpha", "1.5", "--n0", "32",
                            "--reps", "400", "--seed", "3")
        assert code == cli.EXIT_OK
        config, rows = cli.read_csv(out)
        assert config["alpha"] == 1.5 and config["seed"] == 3 and config["n0"] == 32
        assert list(rows[0]) == list(cli.CSV_COLUMNS)
        assert [r["n"] for r in rows] == ["32", "64", "128", "inf"]
        assert rows[-1]["extrapolated"] == "True"
        for r in rows:
            float(r["mean"]), float(r["half_width"]), int(r["R"])
        assert abs(float(rows[-1]["mean"]) - 1.2791) < 4 * float(rows[-1]["half_width"])

    def test_json_round_trip(self, capsys):
        code, out, _ = _run(capsys, "estimate", "--functional", "c-alpha", "--reps", "100", "--format", "json")
        assert code == 0
        doc = json.loads(out)
        assert doc["config"]["reps"] == 100 and doc["config"]["quad"] == 4096
        assert set(doc["rows"][0]) == set(cli.CSV_COLUMNS)

    def test_identical_output_twice(self, capsys, tmp_path):
        path = tmp_path / "a.csv"
        outputs = []
        for _ in range(2):
            assert cli.main(["estimate", "--functional", "V2", "--dim", "2", "--convention", "std-bm",
                             "--n0", "16", "--reps", "50", "--out", str(path)]) == 0
            outputs.append(path.read_bytes())
        assert outputs[0] == outputs[1]

    def test_mixed_volume_rows(self, capsys):
        code, out, _ = _run(capsys, "estimate", "--functional", "mixed-volume", "--dim", "3", "--body", "cube:1",
                            "--n0", "16", "--reps", "50")
        assert code == 0
        _, rows = cli.read_csv(out)
        assert rows[-1]["functional"] == "mixed-volume-rhs"
        assert float(rows[-1]["mean"]) == pytest.approx(2 / math.sqrt(math.pi) * 2)

    def test_asymptotics_rows(self, capsys):
        code, out, _ = _run(capsys, "estimate", "--functional", "asymptotics", "--dim", "3", "--convention",
                            "std-bm", "--n0", "16", "--reps", "20", "--points", "500", "--fit-count", "3")
        assert code == 0
        _, rows = cli.read_csv(out)
        names = [r["functional"] for r in rows]
        assert names.count("sausage") == 16 and names[-2:] == ["asymptotics-slope", "asymptotics-theory"]
        assert float(rows[-1]["mean"]) == pytest.approx(10.027, abs=1e-3)

    @pytest.mark.parametrize("functional", ["spitzer", "scaling-check", "sausage", "V1"])
    def test_other_functionals(self, capsys, functional):
        code, out, err = _run(capsys, "estimate", "--functional", functional, "--dim", "2", "--n0", "8",
                              "--reps", "20", "--points", "200", "--t", "0.5")
        assert code == 0, err
        assert len(cli.read_csv(out)[1]) >= 2


class TestErrors:
    def test_t_zero(self, capsys):
        code, _, err = _run(capsys, "estimate", "--t", "0")
        assert code == cli.EXIT_CONFIG
        assert "t must be positive" in err

    @pytest.mark.parametrize("argv", [
        ["estimate", "--alpha", "0.9"],
        ["estimate", "--convention", "std-bm", "--alpha", "1.5"],
        ["estimate", "--functional", "bogus"],
        ["estimate", "--body", "ball:1,2", "--functional", "sausage"],
        ["estimate", "--reps", "1"],
        ["estimate", "--dim", "2", "--u", "1,0,0"],
        ["estimate", "--functional", "mixed-volume", "--dim", "2", "--body", "lpball:3,1"],
        ["verify", "--claims", "no-such-claim"],
        ["frobnicate"],
    ])
    def test_config_errors(self, capsys, argv):
        assert cli.main(argv) == cli.EXIT_CONFIG

    def test_verification_failure_code(self, capsys, monkeypatch):
        from stablehull import verify as V
        from stablehull.mc_engine import EstimateCI

        fake = V.ClaimResult("x", 0, EstimateCI(10, 1.0, 0.0, 0.0, 0.99), 2.0, 0.0, 0.01, "tolerance")
        monkeypatch.setattr(V, "run_claims", lambda *a, **k: [fake])
        code, out, err = _run(capsys, "verify")
        assert code == cli.EXIT_FAIL
        assert json.loads(out)["passed"] is False
        assert "FAIL" in err

    def test_runtime_failure_code(self, capsys, monkeypatch):
        monkeypatch.setattr(cli, "cmd_estimate", lambda cfg: 1 / 0)
        assert cli.main(["estimate"]) == cli.EXIT_RUNTIME


class TestConfig:
    def test_file_and_flag_precedence(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# comment\nalpha = 1.5\nreps = 30\nn0 = 8\nt-grid = 0.4,0.2,0.1\n")
        code, out, _ = _run(capsys, "estimate", "--config", str(cfg), "--reps", "40")
        assert code == 0
        config, rows = cli.read_csv(out)
        assert config["alpha"] == 1.5 and config["reps"] == 40 and config["t_grid"] == [0.4, 0.2, 0.1]
        assert rows[0]["R"] == "40"

    def test_unknown_key(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("alpha = 2\ncolour = blue\n")
        code, _, err = _run(capsys, "estimate", "--config", str(cfg))
        assert code == cli.EXIT_CONFIG and "colour" in err

    def test_malformed_line(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("alpha 2\n")
        assert cli.main(["estimate", "--config", str(cfg)]) == cli.EXIT_CONFIG

    def test_missing_file(self, capsys):
        assert cli.main(["estimate", "--config", "/nonexistent/x.cfg"]) == cli.EXIT_CONFIG

    def test_env_seed(self, monkeypatch, capsys):
        monkeypatch.setenv(cli.SEED_ENV, "77")
        config, _ = cli.read_csv(_run(capsys, "estimate", "--functional", "c-alpha", "--reps", "10")[1])
        assert config["seed"] == 77
        config, _ = cli.read_csv(_run(capsys, "estimate", "--functional", "c-alpha", "--reps", "10",
                                      "--seed", "5")[1])
        assert config["seed"] == 5

    def test_parse_body(self):
        assert cli.parse_body("ball:2", 3).radius == 2.0
        assert cli.parse_body("lpball:1.5,2", 2).p == 1.5
        assert cli.parse_body("cube:2", 2).volume == pytest.approx(4.0)
        assert cli.parse_body("box:1,2,3", 3).volume == pytest.approx(6.0)
        for bad in ("box:1,2", "disc:1", "ball:x", "ball:-1"):
            with pytest.raises(cli.ConfigError):
                cli.parse_body(bad, 3)


class TestSamplePath:
    def test_one_step(self, capsys):
        code, out, _ = _run(capsys, "sample-path", "--n0", "1", "--dim", "2")
        assert code == 0
        _, rows = cli.read_csv(out)
        assert len(rows) == 2
        assert list(rows[0]) == ["k", "time", "x_1", "x_2"]
        assert float(rows[0]["x_1"]) == 0.0 and float(rows[0]["x_2"]) == 0.0

    def test_zero_horizon_allowed(self, capsys):
        code, out, _ = _run(capsys, "sample-path", "--n0", "3", "--t", "0")
        assert code == 0
        assert all(float(r["x_1"]) == 0 for r in cli.read_csv(out)[1])

    def test_reproducible(self, capsys):
        a = _run(capsys, "sample-path", "--n0", "20", "--alpha", "1.3", "--seed", "4")[1]
        b = _run(capsys, "sample-path", "--n0", "20", "--alpha", "1.3", "--seed", "4")[1]
        assert a == b

    def test_heavy_jumps_visible(self, capsys):
        seen = 0
        for seed in range(20):
            _, rows = cli.read_csv(_run(capsys, "sample-path", "--n0", "200", "--dim", "2", "--alpha", "1.2",
                                        "--seed", str(seed))[1])
            x = np.array([[float(r["x_1"]), float(r["x_2"])] for r in rows])
            steps = np.linalg.norm(np.diff(x, axis=0), axis=1)
            seen += steps.max() > 5 * np.median(steps)
        assert seen >= 10


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "stablehull", "sample-path", "--n0", "2"], capture_output=True,
                         text=True, check=True)
    assert out.stdout.startswith("# config: ")
