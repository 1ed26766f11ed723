import csv
import json
import math
import subprocess
import sys

import pytest

from gdirichlet.cli import EXIT_ASSERT, EXIT_BUDGET, EXIT_CONFIG, EXIT_OK, main
from gdirichlet.weights import WeightSystem


@pytest.fixture
def files(tmp_path):
    (tmp_path / "power11.json").write_text('{"rho": [1.0], "sigma": [1.0]}')
    (tmp_path / "f1.json").write_text('{"kind": "f1"}')
    (tmp_path / "small.json").write_text('{"kind": "scaled_power", "b": 0.2, "a": 1.0}')
    return tmp_path


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


class TestCheck:
    def test_smoke_example(self, files, capsys, schema):
        code, out, _ = run(["check", "--theta", "0.618034", "--eta", "0.25",
                            "--weights", files / "power11.json", "--g", files / "f1.json",
                            "--tmin", "1", "--tmax", "1000", "--json", "-"], capsys)
        assert code == EXIT_OK
        rep = json.loads(out)
        schema(rep, "check_report")
        assert rep["verdict"] in ("dirichlet_on_window", "fails_on_window")

    def test_assert_exit(self, files, capsys):
        argv = ["check", "--theta", "golden", "--weights", files / "power11.json",
                "--g", files / "small.json", "--tmax", "1000", "--assert"]
        code, out, _ = run(argv, capsys)
        assert code == EXIT_ASSERT and out.startswith("fails_on_window")

    def test_gap_csv_round_trips(self, files, capsys):
        target = files / "gaps.csv"
        code, _, _ = run(["check", "--theta", "0.3", "--weights", files / "power11.json",
                          "--g", '{"kind": "scaled_power", "b": 0.45}', "--tmax", "1000",
                          "--csv", target], capsys)
        assert code == EXIT_OK
        rows = list(csv.reader(target.open()))
        assert rows[0] == ["gap_left", "gap_right"]
        for a, b in rows[1:]:
            assert repr(float(a)) == a and repr(float(b)) == b

    def test_budget_exit(self, capsys):
        code, _, err = run(["check", "--theta", "0.3", "--tmax", "1e7", "--budget", "1000"],
                           capsys)
        assert code == EXIT_BUDGET and "budget" in err

    @pytest.mark.parametrize("argv", [
        ["check", "--theta", "0.3"],
        ["check", "--theta", "0.3", "--tmax", "10", "--unknown"],
        ["check", "--theta", "0.3", "--tmax", "10", "--seed", "-1"],
        ["check", "--theta", "0.3", "--tmax", "10", "--seed", str(2 ** 64)],
        ["check", "--theta", "0.3", "--tmax", "10", "--g", '{"kind": "nope"}'],
        ["check", "--theta", "0.3,x", "--tmax", "10"],
        ["check", "--theta", "0.3", "--tmax", "10", "--weights", "/nonexistent.json"],
        ["check", "--theta", "0.3", "--tmin", "0.5", "--tmax", "10"],
        ["frobnicate"],
        [],
    ])
    def test_config_errors(self, argv, capsys):
        code, _, err = run(argv, capsys)
        assert code == EXIT_CONFIG and err


class TestManifest:
    def test_replay_is_byte_identical(self, files, capsys, schema):
        cfg = files / "zo.json"
        cfg.write_text(json.dumps({"weights": {"rho": [1.0], "sigma": [1.0]},
                                   "g": {"kind": "powerlog_decay", "c": 2.0, "b": -1.0},
                                   "N": 30, "schedule": [100.0, 1000.0], "t_min": 2.0}))
        out = files / "zo_out.json"
        argv = ["zeroone", "--config", cfg, "--seed", "12345678901234567890",
                "--workers", "1", "--json", out, "--csv", files / "zo.csv"]
        assert run(argv, capsys)[0] == EXIT_OK
        first = out.read_bytes()
        first_csv = (files / "zo.csv").read_bytes()
        schema(json.loads(first), "measure_estimate")
        man_path = files / "zo_out.json.manifest.json"
        man = json.loads(man_path.read_text())
        schema(man, "run_manifest")
        assert man["seed"] == 12345678901234567890
        assert man["outputs"] == [str(out), str(files / "zo.csv")]
        out.unlink()
        (files / "zo.csv").unlink()
        assert run(["--from-manifest", man_path], capsys)[0] == EXIT_OK
        assert out.read_bytes() == first
        assert (files / "zo.csv").read_bytes() == first_csv
        again = json.loads(man_path.read_text())
        again.pop("wall_time"), man.pop("wall_time")
        assert again == man

    def test_explicit_manifest_path(self, files, capsys, schema):
        man = files / "m.json"
        code, out, _ = run(["systole", "--theta", "golden", "--tmax", "100",
                            "--manifest", man], capsys)
        assert code == EXIT_OK and "running_min" in out
        schema(json.loads(man.read_text()), "run_manifest")


class TestOtherCommands:
    def test_transference_example(self, capsys, schema, tmp_path):
        target = tmp_path / "t.json"
        code, _, _ = run(["transference", "selftest", "--dim", "4", "--trials", "1000",
                          "--seed", "7", "--assert", "--json", target], capsys)
        assert code == EXIT_OK
        rep = json.loads(target.read_text())
        schema(rep, "transference_selftest")
        assert rep["violations_part1"] == rep["violations_part2"] == 0

    def test_weights_emit_example(self, tmp_path, capsys):
        target = tmp_path / "fig1.csv"
        code, _, _ = run(["weights", "emit", "--example", "changing-weights", "--tmax", "625",
                          "--csv", target], capsys)
        assert code == EXIT_OK
        rows = list(csv.reader(target.open()))
        assert rows[0] == ["t", "gamma1", "gamma2", "phi1", "phi2"]
        assert len(rows) == 1002
        ws = WeightSystem.changing_weights()
        for row in rows[1::100]:
            t, g1, g2, _, _ = (float(v) for v in row)
            # gamma_i = ln beta_i(e^t), and beta_1 beta_2 = T
            assert g1 + g2 == pytest.approx(t, abs=1e-9)
            if t < 50:
                assert g1 == pytest.approx(math.log(float(ws.beta[0](math.exp(t)))), abs=1e-9)

    def test_systole_csv_and_threshold(self, tmp_path, capsys, schema):
        target = tmp_path / "s.csv"
        js = tmp_path / "s.json"
        code, _, _ = run(["systole", "--theta", "golden", "--tmax", "1e4", "--csv", target,
                          "--json", js, "--assert", "--threshold", "0.6"], capsys)
        assert code == EXIT_OK
        schema(json.loads(js.read_text()), "systole_trace")
        rows = list(csv.reader(target.open()))
        assert rows[0] == ["T", "systole", "running_min"]
        code, _, _ = run(["systole", "--theta", "liouville", "--tmax", "1e14", "--assert",
                          "--threshold", "0.05"], capsys)
        assert code == EXIT_ASSERT

    def test_improvability(self, capsys, schema):
        code, out, _ = run(["improvability", "--theta", "liouville", "--delta", "0.1",
                            "--samples", "50", "--seed", "3", "--json", "-", "--assert"], capsys)
        assert code == EXIT_OK
        schema(json.loads(out), "improvability_report")

    def test_series(self, capsys, schema):
        code, out, _ = run(["series", "--weights", '{"rho": [1.0], "sigma": [1.0]}',
                            "--g", '{"kind": "powerlog_decay", "b": 2.0}', "--json", "-"],
                           capsys)
        assert code == EXIT_OK
        rep = json.loads(out)
        schema(rep, "series_report")
        assert rep["dirichlet"]["verdict"] == "converges"
        code, out, _ = run(["series", "--stock", "--assert"], capsys)
        assert code == EXIT_OK and "conv-01" in out

    def test_zeroone_requires_config(self, capsys):
        assert run(["zeroone"], capsys)[0] == EXIT_CONFIG


def test_console_script():
    out = subprocess.run([sys.executable, "-m", "gdirichlet.cli", "check", "--theta", "0.5",
                          "--tmax", "10"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("dirichlet_on_window")
